//! Two-slit experiment driven by the superposed phase metric.
//!
//! With detector A off, the hit density at screen position `x` is the volume
//! element of `½(G(α) + G(β))` with path-length phases `α = 2πL₁/λ`,
//! `β = 2πL₂/λ`. With the detector on, the density is two single-slit
//! envelopes with no cross term. Turning the detector on trips a one-way
//! latch for the rest of the run.

use rayon::prelude::*;

use crate::field::GridDistribution;
use crate::metric::interference_density;
use crate::stats::{self, ChiSquareTest};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitGeometry {
    /// Distance `d` between the slit centres, in grains.
    pub slit_separation: f64,
    /// Slit plane to screen, in grains.
    pub screen_distance: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub bins: usize,
    /// de Broglie wavelength, in grains.
    pub lambda: f64,
    /// Standard deviation of each single-slit envelope on the screen.
    pub envelope_width: f64,
    pub detector_a_on: bool,
}

impl Default for SlitGeometry {
    fn default() -> Self {
        Self {
            slit_separation: 20.0,
            screen_distance: 200.0,
            x_min: -30.0,
            x_max: 30.0,
            bins: 60,
            lambda: 1.0,
            envelope_width: 200.0,
            detector_a_on: false,
        }
    }
}

pub const MIN_BINS: usize = 16;
pub const MIN_PARTICLES: usize = 10_000;

impl SlitGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("slit_separation", self.slit_separation)?;
        positive("screen_distance", self.screen_distance)?;
        positive("lambda", self.lambda)?;
        positive("envelope_width", self.envelope_width)?;
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "screen window [{}, {}] is empty",
                self.x_min, self.x_max
            )));
        }
        if self.bins < MIN_BINS {
            return Err(Error::InvalidParameter(format!("need at least {MIN_BINS} bins, got {}", self.bins)));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.bins as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.bin_width()
    }

    /// Slit-to-screen path lengths `(L₁, L₂)` for slits at `∓d/2`.
    pub fn path_lengths(&self, x: f64) -> (f64, f64) {
        let half = 0.5 * self.slit_separation;
        (
            self.screen_distance.hypot(x + half),
            self.screen_distance.hypot(x - half),
        )
    }

    pub fn path_difference(&self, x: f64) -> f64 {
        let (l1, l2) = self.path_lengths(x);
        l1 - l2
    }

    /// Single-slit envelope weights `(A, B)` at `x`.
    pub fn envelopes(&self, x: f64) -> (f64, f64) {
        let half = 0.5 * self.slit_separation;
        let g = |c: f64| {
            let z = (x - c) / self.envelope_width;
            (-0.5 * z * z).exp()
        };
        (g(-half), g(half))
    }
}

/// Unnormalized hit density at `x`.
pub fn two_slit_profile(geom: &SlitGeometry, x: f64) -> f64 {
    if geom.detector_a_on {
        let (a, b) = geom.envelopes(x);
        a + b
    } else {
        let (l1, l2) = geom.path_lengths(x);
        let k = std::f64::consts::TAU / geom.lambda;
        interference_density(k * l1, k * l2)
    }
}

/// Density evaluated at each bin centre, normalized over the window.
pub fn two_slit_density(geom: &SlitGeometry) -> Result<GridDistribution> {
    geom.validate()?;
    let weights = (0..geom.bins).map(|i| two_slit_profile(geom, geom.bin_center(i))).collect();
    GridDistribution::new(geom.bin_center(0), geom.bin_width(), weights)
}

/// One-way memory of a measurement: once tripped it stays tripped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MeasurementLatch {
    tripped: bool,
}

impl MeasurementLatch {
    pub fn trip(&mut self) {
        self.tripped = true;
    }

    pub fn is_tripped(&self) -> bool {
        self.tripped
    }
}

/// A run of the experiment. Detector A can be switched on at any time, which
/// trips the latch; switching it off again does not restore fringes.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSlitRun {
    geometry: SlitGeometry,
    latch: MeasurementLatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSlitOutcome {
    pub bin_centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    /// Particles labelled as passing slit A and slit B.
    pub slit_counts: [u64; 2],
    pub chi_square: ChiSquareTest,
    pub visibility: f64,
    pub detector_on: bool,
}

const SLIT_TAG: u64 = 0x534c_4954;

impl TwoSlitRun {
    pub fn new(geometry: SlitGeometry) -> Result<Self> {
        geometry.validate()?;
        let mut latch = MeasurementLatch::default();
        if geometry.detector_a_on {
            latch.trip();
        }
        Ok(Self { geometry, latch })
    }

    pub fn set_detector(&mut self, on: bool) {
        self.geometry.detector_a_on = on;
        if on {
            self.latch.trip();
        }
    }

    pub fn latch(&self) -> MeasurementLatch {
        self.latch
    }

    /// Geometry as seen by the particles: the detector counts as on once the
    /// latch has tripped.
    pub fn effective_geometry(&self) -> SlitGeometry {
        SlitGeometry {
            detector_a_on: self.latch.is_tripped(),
            ..self.geometry
        }
    }

    pub fn density(&self) -> Result<GridDistribution> {
        two_slit_density(&self.effective_geometry())
    }

    /// Sends `n` particles one at a time, each sampled by inverse CDF over
    /// the binned density and labelled with the slit it went through.
    pub fn run(&self, n: usize, seed: u64) -> Result<TwoSlitOutcome> {
        if n < MIN_PARTICLES {
            return Err(Error::InvalidParameter(format!("need at least {MIN_PARTICLES} particles, got {n}")));
        }
        let geom = self.effective_geometry();
        let density = two_slit_density(&geom)?;
        let bins = density.len();
        let mut cdf: Vec<f64> = density
            .weights()
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        cdf[bins - 1] = 1.0;
        let label_a: Vec<f64> = (0..bins)
            .map(|i| {
                let (a, b) = geom.envelopes(geom.bin_center(i));
                a / (a + b)
            })
            .collect();

        let zero = || (vec![0u64; bins], [0u64; 2]);
        let (counts, slit_counts) = (0..n as u64)
            .into_par_iter()
            .fold(zero, |(mut counts, mut slits), i| {
                let key = rng::hash(seed, &[SLIT_TAG, i]);
                let u = rng::unit_at(key, &[0]);
                let bin = cdf.partition_point(|c| *c <= u).min(bins - 1);
                counts[bin] += 1;
                let through_a = rng::unit_at(key, &[1]) < label_a[bin];
                slits[usize::from(!through_a)] += 1;
                (counts, slits)
            })
            .reduce(zero, |(mut c1, mut s1), (c2, s2)| {
                c1.iter_mut().zip(c2).for_each(|(x, y)| *x += y);
                s1[0] += s2[0];
                s1[1] += s2[1];
                (c1, s1)
            });

        let expected: Vec<f64> = density.weights().iter().map(|w| w * n as f64).collect();
        Ok(TwoSlitOutcome {
            bin_centers: (0..bins).map(|i| geom.bin_center(i)).collect(),
            chi_square: stats::chi_square(&counts, &expected, 5.0),
            visibility: visibility(&counts),
            counts,
            expected,
            slit_counts,
            detector_on: geom.detector_a_on,
        })
    }
}

pub fn two_slit_experiment(geom: &SlitGeometry, n: usize, seed: u64) -> Result<TwoSlitOutcome> {
    TwoSlitRun::new(*geom)?.run(n, seed)
}

/// Fringe visibility `(max − min)/(max + min)` of a histogram.
pub fn visibility(counts: &[u64]) -> f64 {
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    let min = counts.iter().copied().min().unwrap_or(0) as f64;
    if max + min == 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bisection for `ΔL(x) = target` on `[lo, hi]`.
    fn solve_path_difference(geom: &SlitGeometry, target: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (geom.path_difference(mid) - target) * (geom.path_difference(lo) - target) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn center_is_brightest() {
        let g = SlitGeometry::default();
        let peak = two_slit_profile(&g, 0.0);
        assert!((peak - 1.0).abs() < 1e-12);
        for i in 0..1000 {
            let x = g.x_min + i as f64 * 0.06;
            assert!(two_slit_profile(&g, x) <= peak + 1e-12);
        }
    }

    #[test]
    fn first_null_sits_at_half_wavelength_path_difference() {
        let g = SlitGeometry::default();
        let x0 = solve_path_difference(&g, 0.5 * g.lambda, 0.0, 10.0);
        assert!(two_slit_profile(&g, x0) < 1e-9);
        // the bin holding the null is a local minimum of the binned density
        let density = two_slit_density(&g).unwrap();
        let bin = ((x0 - g.x_min) / g.bin_width()) as usize;
        let w = density.weights();
        assert!(w[bin] < w[bin - 2] && w[bin] < w[bin + 2]);

        let on = SlitGeometry { detector_a_on: true, ..g };
        assert!(two_slit_profile(&on, x0) > 0.1 * two_slit_profile(&on, 0.0));
    }

    #[test]
    fn profile_is_abs_cos_of_path_difference() {
        let g = SlitGeometry::default();
        for i in 0..200 {
            let x = -30.0 + 0.3 * i as f64;
            let closed = (std::f64::consts::PI * g.path_difference(x) / g.lambda).cos().abs();
            // phases of order 10³ rad cost a few digits
            assert!((two_slit_profile(&g, x) - closed).abs() < 1e-9, "x {x}");
        }
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let g = SlitGeometry::default();
        assert!(SlitGeometry { bins: 15, ..g }.validate().is_err());
        assert!(SlitGeometry { lambda: 0.0, ..g }.validate().is_err());
        assert!(SlitGeometry { x_max: -40.0, ..g }.validate().is_err());
        assert!(two_slit_experiment(&g, 9_999, 0).is_err());
    }

    #[test]
    fn fringes_fit_the_density() {
        let out = two_slit_experiment(&SlitGeometry::default(), 1_000_000, 31).unwrap();
        assert_eq!(out.counts.iter().sum::<u64>(), 1_000_000);
        assert_eq!(out.slit_counts.iter().sum::<u64>(), 1_000_000);
        assert!(out.chi_square.p_value > 0.001, "{:?}", out.chi_square);
        assert!(out.visibility > 0.5);
    }

    #[test]
    fn detector_wipes_out_fringes() {
        let g = SlitGeometry {
            detector_a_on: true,
            ..SlitGeometry::default()
        };
        let out = two_slit_experiment(&g, 1_000_000, 31).unwrap();
        assert!(out.detector_on);
        assert!(out.visibility < 0.05, "visibility {}", out.visibility);
        assert!(out.chi_square.p_value > 0.001);
    }

    #[test]
    fn same_seed_same_histogram() {
        let g = SlitGeometry::default();
        let a = two_slit_experiment(&g, 20_000, 4).unwrap();
        let b = two_slit_experiment(&g, 20_000, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn latch_is_one_way() {
        let mut run = TwoSlitRun::new(SlitGeometry::default()).unwrap();
        assert!(!run.latch().is_tripped());
        run.set_detector(true);
        run.set_detector(false);
        assert!(run.latch().is_tripped());
        let off_again = run.run(200_000, 2).unwrap();
        assert!(off_again.detector_on);
        assert!(off_again.visibility < 0.1);
        // a fresh run restores the fringes
        let fresh = TwoSlitRun::new(SlitGeometry::default()).unwrap().run(200_000, 2).unwrap();
        assert!(fresh.visibility > 0.5);
    }

    proptest! {
        #[test]
        fn detector_toggles_never_restore_fringes(toggles in proptest::collection::vec(any::<bool>(), 1..8)) {
            let mut run = TwoSlitRun::new(SlitGeometry::default()).unwrap();
            for &t in &toggles {
                run.set_detector(t);
            }
            let envelope = two_slit_density(&SlitGeometry { detector_a_on: true, ..SlitGeometry::default() }).unwrap();
            let fringes = two_slit_density(&SlitGeometry::default()).unwrap();
            let expect = if toggles.contains(&true) { envelope } else { fringes };
            prop_assert_eq!(run.density().unwrap(), expect);
        }

        #[test]
        fn symmetric_slits_give_symmetric_density(d in 1.0f64..40.0, big_d in 50.0f64..500.0, lambda in 0.2f64..3.0, half in 5.0f64..60.0, bins in 16usize..120, on in any::<bool>()) {
            let g = SlitGeometry {
                slit_separation: d,
                screen_distance: big_d,
                x_min: -half,
                x_max: half,
                bins,
                lambda,
                envelope_width: 0.25 * d,
                detector_a_on: on,
            };
            let w = two_slit_density(&g).unwrap();
            let w = w.weights();
            for i in 0..bins {
                prop_assert!((w[i] - w[bins - 1 - i]).abs() < 1e-9 * w.iter().cloned().fold(0.0, f64::max));
            }
        }
    }
}
