//! Index raising through a fluctuating metric and the volume-scaling
//! uncertainty product.
//!
//! A covariant momentum `p_ν` is fixed and noise-free. What is observed is the
//! contravariant `p^j = g^{jν} p_ν`, so every bit of scatter in `p^j` comes from
//! the metric. Averaging the metric over a region of `m` venues shrinks that
//! scatter like `1/m` while the position uncertainty grows like `m`.

use rayon::prelude::*;

use crate::field::{self, FluctuationModel, Venue};
use crate::metric::Metric4;
use crate::{rng, stats, Error, Metric, Result, Scalar};

/// Covariant momentum and the contravariant one observed through a metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumPair<T> {
    pub p_cov: [T; 4],
    pub p_contra: [T; 4],
}

impl<T: Scalar> MomentumPair<T> {
    pub fn observe(g: &Metric4<T>, p_cov: [T; 4]) -> Result<Self> {
        Ok(Self {
            p_cov,
            p_contra: raise_index(g, &p_cov)?,
        })
    }
}

/// `p^j = g^{jν} p_ν`.
pub fn raise_index<T: Scalar>(g: &Metric4<T>, p_cov: &[T; 4]) -> Result<[T; 4]> {
    let inv = g.inverse()?;
    Ok(contract(inv.entries(), p_cov))
}

/// `v_j = g_{jν} v^ν`.
pub fn lower_index<T: Scalar>(g: &Metric4<T>, v: &[T; 4]) -> [T; 4] {
    contract(g.entries(), v)
}

fn contract<T: Scalar>(m: &[[T; 4]; 4], v: &[T; 4]) -> [T; 4] {
    std::array::from_fn(|j| (0..4).fold(T::zero(), |acc, nu| acc + m[j][nu] * v[nu]))
}

/// Position component paired with momentum in the experiment (0-based; x¹).
pub const DEFAULT_COMPONENT: usize = 0;

const UNCERTAINTY_TAG: u64 = 0x554e_4345;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyRow {
    pub m: usize,
    /// One-dimensional volume `m · grain`.
    pub dq: f64,
    /// `Σ_ν |p_ν| · Var(ḡ^{ν1})`.
    pub dp: f64,
    pub product: f64,
    /// `Σ_ν |p_ν| · sd(ḡ^{ν1})`, the standard-deviation reading.
    pub dp_std: f64,
    pub product_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyTable {
    pub rows: Vec<UncertaintyRow>,
}

impl UncertaintyTable {
    /// `max/min` of the variance-reading product. Infinite when some product
    /// is zero and another is not; 1 when all are zero.
    pub fn product_ratio(&self) -> f64 {
        ratio(self.rows.iter().map(|r| r.product))
    }

    pub fn product_std_ratio(&self) -> f64 {
        ratio(self.rows.iter().map(|r| r.product_std))
    }
}

fn ratio(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

pub fn uncertainty_product_experiment(
    model: &FluctuationModel,
    m_values: &[usize],
    p_cov: [f64; 4],
    trials: usize,
    seed: u64,
) -> Result<UncertaintyTable> {
    uncertainty_product_for_component(model, DEFAULT_COMPONENT, m_values, p_cov, trials, 1.0, seed)
}

/// For each region size `m`, averages the inverse metric over `m` venues
/// along x¹, repeats over `trials` disjoint regions, and combines the
/// across-trial variance of `ḡ^{ν,component}` with `|p_ν|`.
pub fn uncertainty_product_for_component(
    model: &FluctuationModel,
    component: usize,
    m_values: &[usize],
    p_cov: [f64; 4],
    trials: usize,
    grain: f64,
    seed: u64,
) -> Result<UncertaintyTable> {
    model.validate()?;
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!("trials must be >= 1000, got {trials}")));
    }
    if component > 3 {
        return Err(Error::InvalidParameter(format!("component {component} out of range")));
    }
    if m_values.is_empty() || m_values.contains(&0) {
        return Err(Error::InvalidParameter("m values must be non-empty and >= 1".into()));
    }
    if !(grain > 0.0 && grain.is_finite()) || p_cov.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter("grain must be > 0 and p_cov finite".into()));
    }

    let mut rows = Vec::with_capacity(m_values.len());
    for (k, &m) in m_values.iter().enumerate() {
        let columns: Vec<[f64; 4]> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let venues: Vec<Venue> = field::line_region_at(m, trial as i64)
                    .into_iter()
                    .map(|v| Venue { grain, ..v })
                    .collect();
                let path = [UNCERTAINTY_TAG, k as u64, trial as u64];
                let mut draw = rng::stream(seed, &path);
                let phase_time = field::trial_phase_time(model, seed, &path);
                let inverses = venues
                    .iter()
                    .map(|v| field::sample_metric(model, v, phase_time, &mut draw).inverse())
                    .collect::<Result<Vec<Metric>>>()?;
                let avg = Metric::mean(&inverses).expect("non-empty region");
                Ok(std::array::from_fn(|nu| avg.get(nu, component)))
            })
            .collect::<Result<_>>()?;

        let mut dp = 0.0;
        let mut dp_std = 0.0;
        for (nu, p) in p_cov.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let column: Vec<f64> = columns.iter().map(|c| c[nu]).collect();
            let var = stats::variance(&column);
            dp += p.abs() * var;
            dp_std += p.abs() * var.sqrt();
        }
        let dq = m as f64 * grain;
        rows.push(UncertaintyRow {
            m,
            dq,
            dp,
            product: dq * dp,
            dp_std,
            product_std: dq * dp_std,
        });
    }
    Ok(UncertaintyTable { rows })
}

/// Standard deviation of each `p^j` over `draws` independent single-venue
/// metrics.
pub fn contravariant_scatter(model: &FluctuationModel, p_cov: [f64; 4], draws: usize, seed: u64) -> Result<[f64; 4]> {
    model.validate()?;
    let samples: Vec<[f64; 4]> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let path = [UNCERTAINTY_TAG, u64::MAX, i as u64];
            let mut draw = rng::stream(seed, &path);
            let phase_time = field::trial_phase_time(model, seed, &path);
            let venue = Venue {
                iy: i as i64,
                ..Venue::origin()
            };
            raise_index(&field::sample_metric(model, &venue, phase_time, &mut draw), &p_cov)
        })
        .collect::<Result<_>>()?;
    Ok(std::array::from_fn(|j| {
        let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        stats::variance(&column).sqrt()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Inverse via Gauss-Jordan elimination with partial pivoting.
    fn gauss_jordan_inverse(m: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
        let mut a = m;
        let mut inv = [[0.0; 4]; 4];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for col in 0..4 {
            let pivot = (col..4).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let d = a[col][col];
            for k in 0..4 {
                a[col][k] /= d;
                inv[col][k] /= d;
            }
            for r in 0..4 {
                if r != col {
                    let f = a[r][col];
                    for k in 0..4 {
                        a[r][k] -= f * a[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn minkowski_flips_time_component() {
        let p = raise_index(&Metric::minkowski(), &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(p, [0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn diagonal_metric_against_gauss_jordan() {
        let g = Metric::diag([1.0, 1.0, 2.0, -0.5]);
        let p = raise_index(&g, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p, [0.0, 0.0, 0.5, 0.0]);
        let inv = gauss_jordan_inverse(*g.entries());
        let expect = contract(&inv, &[0.0, 0.0, 1.0, 0.0]);
        for j in 0..4 {
            assert!((p[j] - expect[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_metric_is_rejected() {
        let g = Metric::diag([1.0, 0.0, 1.0, -1.0]);
        assert!(matches!(raise_index(&g, &[1.0; 4]), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn momentum_pair_satisfies_invariant() {
        let g = Metric::diag([1.1, 0.9, 1.0, -1.0]);
        let pair = MomentumPair::observe(&g, [1.0, 2.0, 0.0, 3.0]).unwrap();
        let back = lower_index(&g, &pair.p_contra);
        for j in 0..4 {
            assert!((back[j] - pair.p_cov[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_tracks_sigma() {
        // p^1 = 1/(1 + δ) ≈ 1 − δ, so sd(p^1) ≈ σ at small σ
        for sigma in [0.01, 0.03] {
            let model = FluctuationModel::quiet().with_sigma(0, 0, sigma).unwrap();
            let sd = contravariant_scatter(&model, [1.0, 0.0, 0.0, 0.0], 10_000, 5).unwrap();
            assert!((sd[0] / sigma - 1.0).abs() < 0.05, "sigma {sigma}: sd {}", sd[0]);
            assert_eq!(&sd[1..], &[0.0; 3]);
        }
    }

    #[test]
    fn quiet_model_has_no_scatter() {
        let t = uncertainty_product_experiment(&FluctuationModel::quiet(), &[1, 4, 16], [1.0, 0.0, 0.0, 1.0], 1000, 1)
            .unwrap();
        assert!(t.rows.iter().all(|r| r.dp == 0.0 && r.product == 0.0));
        assert_eq!(t.product_ratio(), 1.0);
        let sd = contravariant_scatter(&FluctuationModel::quiet(), [1.0, 1.0, 1.0, 1.0], 1000, 1).unwrap();
        assert_eq!(sd, [0.0; 4]);
    }

    #[test]
    fn product_is_independent_of_volume() {
        let m: Vec<usize> = (0..=8).map(|k| 1 << k).collect();
        let t = uncertainty_product_experiment(&FluctuationModel::default(), &m, [1.0, 0.0, 0.0, 1.0], 4000, 11)
            .unwrap();
        assert!(t.product_ratio() < 1.3, "ratio {}", t.product_ratio());
        assert!(t.rows.last().unwrap().dq / t.rows[0].dq > 100.0);
        // the standard-deviation reading grows like √m
        assert!(t.product_std_ratio() > 10.0);
    }

    #[test]
    fn product_is_linear_in_momentum() {
        let model = FluctuationModel::default();
        let a = uncertainty_product_experiment(&model, &[4, 32], [1.0, 0.0, 0.0, 0.0], 2000, 3).unwrap();
        let b = uncertainty_product_experiment(&model, &[4, 32], [2.0, 0.0, 0.0, 0.0], 2000, 3).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!((y.product / x.product - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_trial_counts_are_rejected() {
        let r = uncertainty_product_experiment(&FluctuationModel::default(), &[1], [1.0; 4], 999, 0);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    proptest! {
        #[test]
        fn minkowski_raise_is_an_involution(p in proptest::array::uniform4(-1e3f64..1e3)) {
            let eta = Metric::minkowski();
            let once = raise_index(&eta, &p).unwrap();
            prop_assert_eq!(raise_index(&eta, &once).unwrap(), p);
        }

        #[test]
        fn raise_then_lower_round_trips(d in proptest::array::uniform4(-0.2f64..0.2), p in proptest::array::uniform4(-10.0f64..10.0)) {
            let g = Metric::diag([1.0 + d[0], 1.0 + d[1], 1.0 + d[2], -1.0 + d[3]]);
            let back = lower_index(&g, &raise_index(&g, &p).unwrap());
            for j in 0..4 {
                prop_assert!((back[j] - p[j]).abs() < 1e-10);
            }
        }
    }
}
