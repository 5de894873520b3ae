//! Contravariant versus covariant measurement demonstrations: the radial
//! distance to a Schwarzschild singularity and the idealized photon-timing
//! measurement on a Minkowski diagram.

use crate::{Error, Result, Scalar};

/// One level of grid refinement of the covariant distance integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementLevel<T> {
    pub cells: usize,
    pub step: T,
    /// Last grid node strictly before the singularity.
    pub last_node: T,
    /// `Σ |Δξ₁|` over all cells ending before the singularity.
    pub partial_sum: T,
}

/// Structured evidence that the covariant integral does not converge.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport<T> {
    /// Radius `2Gm` where `r/(1 − 2Gm/r)` has a non-integrable pole.
    pub singularity_at: T,
    pub levels: Vec<RefinementLevel<T>>,
}

impl<T: Scalar> DivergenceReport<T> {
    /// Partial sums never shrink under refinement and grow like a power of
    /// the cell count (log-log slope above ½); a convergent integral would
    /// level off with slope tending to 0.
    pub fn is_divergent(&self) -> bool {
        let sums: Vec<T> = self.levels.iter().map(|l| l.partial_sum).collect();
        if sums.len() < 3 || !sums.windows(2).all(|w| w[1] >= w[0]) || !(sums[0] > T::zero()) {
            return false;
        }
        self.growth_exponent() > T::lit(0.5)
    }

    /// Least-squares slope of `ln(partial sum)` against `ln(cells)`.
    pub fn growth_exponent(&self) -> T {
        let pts: Vec<(T, T)> = self
            .levels
            .iter()
            .map(|l| (T::from_usize(l.cells).expect("cells fit scalar").ln(), l.partial_sum.ln()))
            .collect();
        let n = T::from_usize(pts.len()).expect("level count fits scalar");
        let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
        let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
        let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
        let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
        sxy / sxx
    }

    pub fn max_partial_sum(&self) -> T {
        self.levels
            .iter()
            .map(|l| l.partial_sum)
            .fold(T::zero(), T::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariantDistance<T> {
    Finite(T),
    Divergent(DivergenceReport<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzschildDistances<T> {
    pub contravariant: T,
    pub covariant: CovariantDistance<T>,
}

/// Grid sizes `2^min_log2 ..= 2^max_log2` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Refinement {
    pub min_log2: u32,
    pub max_log2: u32,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            min_log2: 4,
            max_log2: 24,
        }
    }
}

/// Radial distance to an object at coordinate radius `r_bar` from a mass with
/// `Gm = gm` (units with c = 1).
///
/// The contravariant distance `∫₀^r̄ dr̄` is `r̄`. The covariant coordinate is
/// `ξ₁ = g₁₁ξ¹ = r/(1 − 2Gm/r)`, whose integral over `[0, r̄]` crosses the
/// pole at `r = 2Gm` and is reported as a divergence.
pub fn schwarzschild_distances<T: Scalar>(r_bar: T, gm: T) -> Result<SchwarzschildDistances<T>> {
    schwarzschild_distances_with(r_bar, gm, Refinement::default())
}

pub fn schwarzschild_distances_with<T: Scalar>(
    r_bar: T,
    gm: T,
    refinement: Refinement,
) -> Result<SchwarzschildDistances<T>> {
    if !(r_bar > T::zero()) || gm < T::zero() {
        return Err(Error::InvalidGeometry(format!(
            "need r_bar > 0 and Gm >= 0, got r_bar = {r_bar}, Gm = {gm}"
        )));
    }
    let horizon = T::lit(2.0) * gm;
    if r_bar <= horizon {
        return Err(Error::InvalidGeometry(format!(
            "r_bar = {r_bar} lies inside the horizon 2Gm = {horizon}"
        )));
    }
    // ξ₁(0) = 0 in the limit r → 0
    let xi = |r: T| if r == T::zero() { T::zero() } else { r * r / (r - horizon) };

    let covariant = if gm == T::zero() {
        // exact differential; no pole on the path
        CovariantDistance::Finite(xi(r_bar) - xi(T::zero()))
    } else {
        let levels = (refinement.min_log2..=refinement.max_log2)
            .map(|k| {
                let cells = 1usize << k;
                let step = r_bar / T::from_usize(cells).expect("cell count fits scalar");
                let mut sum = T::zero();
                let mut prev = xi(T::zero());
                let mut last_node = T::zero();
                for i in 1..=cells {
                    let r = step * T::from_usize(i).expect("index fits scalar");
                    if r >= horizon {
                        break;
                    }
                    let cur = xi(r);
                    sum = sum + (cur - prev).abs();
                    prev = cur;
                    last_node = r;
                }
                RefinementLevel {
                    cells,
                    step,
                    last_node,
                    partial_sum: sum,
                }
            })
            .collect();
        CovariantDistance::Divergent(DivergenceReport {
            singularity_at: horizon,
            levels,
        })
    };

    Ok(SchwarzschildDistances {
        contravariant: r_bar,
        covariant,
    })
}

/// Outcome of the photon-timing measurement of an object's two ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementReport<T> {
    /// Arrival times on the time axis of photons emitted from F and B at t(0).
    pub t1: T,
    pub t2: T,
    /// `t(2) − t(1)`.
    pub elapsed: T,
    /// Contravariant (parallelogram-law) x coordinates of F and B.
    pub contravariant: [T; 2],
    /// Covariant x components (orthogonal projection onto the x axis).
    pub covariant: [T; 2],
    /// `|(t(2) − t(1)) − (x² − x¹)|`.
    pub residual: T,
    /// Magnitude the rounding error scales with, `γ²·max(1, |x_F|, |x_B|, |t0|)`.
    pub scale: T,
}

impl<T: Scalar> MeasurementReport<T> {
    pub fn contravariant_difference(&self) -> T {
        self.contravariant[1] - self.contravariant[0]
    }

    pub fn consistent(&self) -> bool {
        self.residual <= T::exact_tol() * self.scale
    }
}

/// Idealized measurement on a Minkowski diagram.
///
/// The object is at rest in the drawing frame; the measuring frame moves with
/// velocity `v`, so its axes are the oblique lines `e_x = γ(1, v)` and
/// `e_t = γ(v, 1)`. At coordinate time `t0` photons leave the ends F (at
/// `x_f`) and B (at `x_b`) and travel along the light cone to the time axis.
/// Intercepts and contravariant coordinates are obtained by independent
/// line-intersection and parallelogram decompositions in the drawing plane.
pub fn idealized_measurement<T: Scalar>(v: T, x_f: T, x_b: T, t0: T) -> Result<MeasurementReport<T>> {
    if !(v.abs() < T::one()) {
        return Err(Error::InvalidGeometry(format!("|v| = {} must be < 1", v.abs())));
    }
    if x_f == x_b {
        return Err(Error::InvalidGeometry("object ends coincide".into()));
    }
    if !(x_f > T::zero() && x_b > T::zero()) {
        return Err(Error::InvalidGeometry(
            "object must lie on the positive x side of the time axis".into(),
        ));
    }
    let gamma = (T::one() - v * v).sqrt().recip();
    let e_x = [gamma, gamma * v];
    let e_t = [gamma * v, gamma];
    let event = |x: T| [x * e_x[0] + t0 * e_t[0], x * e_x[1] + t0 * e_t[1]];
    let f = event(x_f);
    let b = event(x_b);

    // 2x2 solve of `a·u + b·w = p` by Cramer's rule
    let solve = |u: [T; 2], w: [T; 2], p: [T; 2]| {
        let det = u[0] * w[1] - u[1] * w[0];
        [(p[0] * w[1] - p[1] * w[0]) / det, (u[0] * p[1] - u[1] * p[0]) / det]
    };
    // photon `p + λ(−1, 1)` meets the time axis `μ e_t`: λ(−1,1) − μ e_t = −p
    let intercept = |p: [T; 2]| {
        let [_, mu] = solve([-T::one(), T::one()], [-e_t[0], -e_t[1]], [-p[0], -p[1]]);
        mu
    };
    let t1 = intercept(f);
    let t2 = intercept(b);
    let contravariant = [solve(e_x, e_t, f)[0], solve(e_x, e_t, b)[0]];
    let norm = (e_x[0] * e_x[0] + e_x[1] * e_x[1]).sqrt();
    let unit_x = [e_x[0] / norm, e_x[1] / norm];
    let covariant = [
        f[0] * unit_x[0] + f[1] * unit_x[1],
        b[0] * unit_x[0] + b[1] * unit_x[1],
    ];
    let elapsed = t2 - t1;
    let residual = (elapsed - (contravariant[1] - contravariant[0])).abs();
    Ok(MeasurementReport {
        t1,
        t2,
        elapsed,
        contravariant,
        covariant,
        residual,
        scale: gamma * gamma * T::one().max(x_f.abs()).max(x_b.abs()).max(t0.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn schwarzschild_covariant_distance_diverges() {
        let d = schwarzschild_distances(10.0f64, 1.0).unwrap();
        assert_eq!(d.contravariant, 10.0);
        let CovariantDistance::Divergent(report) = d.covariant else {
            panic!("expected divergence");
        };
        assert_eq!(report.singularity_at, 2.0);
        assert!(report.is_divergent());
        assert!((report.growth_exponent() - 1.0).abs() < 0.1);
        assert!(report.max_partial_sum() > 1e6);
        assert!(report.levels.iter().all(|l| l.last_node < 2.0));
    }

    #[test]
    fn flat_space_distances_agree() {
        let d = schwarzschild_distances(10.0, 0.0).unwrap();
        assert_eq!(d.contravariant, 10.0);
        assert_eq!(d.covariant, CovariantDistance::Finite(10.0));
    }

    #[test]
    fn inside_horizon_is_rejected() {
        assert!(matches!(schwarzschild_distances(1.0, 1.0), Err(Error::InvalidGeometry(_))));
        assert!(matches!(schwarzschild_distances(2.0, 1.0), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn partial_sums_track_pole_magnitude() {
        // ξ₁ is monotone below the pole, so the sum telescopes to |ξ₁(last node)|
        let d = schwarzschild_distances_with(10.0f64, 1.0, Refinement { min_log2: 6, max_log2: 10 }).unwrap();
        let CovariantDistance::Divergent(report) = d.covariant else { panic!() };
        for level in &report.levels {
            let r = level.last_node;
            let expect = (r * r / (r - 2.0)).abs();
            assert!((level.partial_sum - expect).abs() < 1e-9 * expect);
        }
    }

    #[test]
    fn rest_frame_measurement() {
        let r = idealized_measurement(0.0, 1.0, 2.5, 0.0).unwrap();
        assert_eq!(r.elapsed, 1.5);
        assert_eq!(r.contravariant, [1.0, 2.5]);
        assert_eq!(r.covariant, [1.0, 2.5]);
        assert!(r.consistent());
    }

    #[test]
    fn moving_frame_measurement() {
        let r = idealized_measurement(0.5f64, 1.0, 2.0, 0.3).unwrap();
        assert!(r.residual < 1e-12);
        assert!(r.consistent(), "residual {}", r.residual);
        assert!((r.t1 - (0.3 + 1.0)).abs() < 1e-12);
        assert!((r.elapsed - 1.0).abs() < 1e-12);
        // covariant components carry the axis angle
        assert!((r.covariant[0] - r.contravariant[0]).abs() > 0.1);
    }

    #[test]
    fn measurement_rejects_bad_input() {
        assert!(idealized_measurement(1.0, 1.0, 2.0, 0.0).is_err());
        assert!(idealized_measurement(0.2, 1.0, 1.0, 0.0).is_err());
        assert!(idealized_measurement(0.2, -1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn measurement_equality_holds(v in -0.999f64..0.999, xf in 0.01f64..50.0, xb in 0.01f64..50.0, t0 in -20.0f64..20.0) {
            prop_assume!((xf - xb).abs() > 1e-6);
            let r = idealized_measurement(v, xf, xb, t0).unwrap();
            prop_assert!(r.consistent(), "residual {} scale {}", r.residual, r.scale);
        }
    }
}
