//! Fluctuating metric fields and the distribution machinery for averaging and
//! propagating them.
//!
//! Two fluctuation models share one sampler:
//!
//! * **stochastic**: every venue draws `δ_{μν} ~ N(0, (σ_{μν}·d)²)`;
//! * **crypto**: `δ_{μν} = σ_{μν}·d·cos(2πν·t + φ_{μν}(venue))`, a deterministic
//!   oscillation whose per-venue phases come from a stateless hash.
//!
//! `d` is the mass-damping factor: 0 at a mass, rising smoothly to 1 at
//! `damping_radius` lattice units away.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::metric::Metric4;
use crate::rng;
use crate::stats::{self, LinearFit};
use crate::{Error, Metric, Result};

pub const DEFAULT_SIGMA: f64 = 0.05;
pub const DEFAULT_FREQUENCY_HZ: f64 = 1e36;
pub const MIN_FREQUENCY_HZ: f64 = 1e30;
pub const MAX_FREQUENCY_HZ: f64 = 1e43;
pub const DEFAULT_DAMPING_RADIUS: f64 = 4.0;

/// Upper-triangular component order used for draws and phase hashing.
pub const COMPONENTS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

/// Discrete spacetime point on a grainy lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Venue {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
    pub it: i64,
    pub grain: f64,
}

impl Venue {
    pub fn new(ix: i64, iy: i64, iz: i64, it: i64, grain: f64) -> Result<Self> {
        if !(grain > 0.0 && grain.is_finite()) {
            return Err(Error::InvalidParameter(format!("grain must be > 0, got {grain}")));
        }
        Ok(Self { ix, iy, iz, it, grain })
    }

    pub fn origin() -> Self {
        Self {
            ix: 0,
            iy: 0,
            iz: 0,
            it: 0,
            grain: 1.0,
        }
    }

    /// Venue containing the continuous point `x` (coordinates in grain units).
    pub fn containing(x: &[f64; 4], grain: f64) -> Self {
        let i = |v: f64| (v / grain).round() as i64;
        Self {
            ix: i(x[0]),
            iy: i(x[1]),
            iz: i(x[2]),
            it: i(x[3]),
            grain,
        }
    }

    pub fn offset(&self, axis: usize, by: i64) -> Self {
        let mut v = *self;
        match axis {
            0 => v.ix += by,
            1 => v.iy += by,
            2 => v.iz += by,
            _ => v.it += by,
        }
        v
    }

    pub fn indices(&self) -> [i64; 4] {
        [self.ix, self.iy, self.iz, self.it]
    }

    /// Euclidean distance between lattice indices, in grains.
    pub fn lattice_distance(&self, other: &Venue) -> f64 {
        self.indices()
            .iter()
            .zip(other.indices())
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluctuationMode {
    Stochastic,
    Crypto { frequency_hz: f64 },
}

/// Per-component amplitudes, oscillation parameters and mass damping.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationModel {
    sigma: [[f64; 4]; 4],
    pub mode: FluctuationMode,
    pub phase_seed: u64,
    pub mass_positions: Vec<Venue>,
    pub damping_radius: f64,
}

impl Default for FluctuationModel {
    /// Stochastic mode, σ = 0.05 on the spatial diagonal and 0 elsewhere.
    fn default() -> Self {
        let mut sigma = [[0.0; 4]; 4];
        for (i, row) in sigma.iter_mut().enumerate().take(3) {
            row[i] = DEFAULT_SIGMA;
        }
        Self {
            sigma,
            mode: FluctuationMode::Stochastic,
            phase_seed: 0,
            mass_positions: Vec::new(),
            damping_radius: DEFAULT_DAMPING_RADIUS,
        }
    }
}

impl FluctuationModel {
    /// Model with every component quiet.
    pub fn quiet() -> Self {
        Self {
            sigma: [[0.0; 4]; 4],
            ..Self::default()
        }
    }

    /// Default amplitudes in crypto mode at `frequency_hz`.
    pub fn crypto(frequency_hz: f64, phase_seed: u64) -> Result<Self> {
        let model = Self {
            mode: FluctuationMode::Crypto { frequency_hz },
            phase_seed,
            ..Self::default()
        };
        model.validate()?;
        Ok(model)
    }

    pub fn sigma(&self, mu: usize, nu: usize) -> f64 {
        self.sigma[mu][nu]
    }

    /// Sets `σ_{μν}` (and its mirror `σ_{νμ}`).
    pub fn with_sigma(mut self, mu: usize, nu: usize, sigma: f64) -> Result<Self> {
        if mu > 3 || nu > 3 {
            return Err(Error::InvalidParameter(format!("component ({mu}, {nu}) out of range")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
        }
        self.sigma[mu][nu] = sigma;
        self.sigma[nu][mu] = sigma;
        Ok(self)
    }

    /// Same amplitude on every diagonal component, including time.
    pub fn with_diagonal_sigma(self, sigma: f64) -> Result<Self> {
        (0..4).try_fold(self, |m, i| m.with_sigma(i, i, sigma))
    }

    pub fn with_masses(mut self, masses: Vec<Venue>) -> Self {
        self.mass_positions = masses;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma.iter().flatten().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter("sigma values must be finite and >= 0".into()));
        }
        if !(self.damping_radius > 0.0) {
            return Err(Error::InvalidParameter("damping_radius must be > 0".into()));
        }
        if let FluctuationMode::Crypto { frequency_hz } = self.mode {
            if !(MIN_FREQUENCY_HZ..=MAX_FREQUENCY_HZ).contains(&frequency_hz) {
                return Err(Error::InvalidParameter(format!(
                    "crypto frequency {frequency_hz:e} Hz outside [1e30, 1e43]"
                )));
            }
        }
        Ok(())
    }

    /// Mass-damping factor `d(venue)`: 0 at a mass, smoothstep in lattice
    /// distance to the nearest mass, 1 beyond `damping_radius`.
    pub fn damping(&self, venue: &Venue) -> f64 {
        let nearest = self
            .mass_positions
            .iter()
            .map(|m| venue.lattice_distance(m))
            .fold(f64::INFINITY, f64::min);
        let x = nearest / self.damping_radius;
        if x >= 1.0 {
            1.0
        } else {
            x * x * (3.0 - 2.0 * x)
        }
    }

    /// Hashed phase offset `φ_{μν}(venue) ∈ [0, 2π)`.
    pub fn phase_offset(&self, venue: &Venue, component: usize) -> f64 {
        let [a, b, c, d] = venue.indices().map(rng::index);
        std::f64::consts::TAU * rng::unit_at(self.phase_seed, &[a, b, c, d, component as u64])
    }
}

/// Metric `η + δ` at a venue. In crypto mode no random numbers are consumed.
pub fn sample_metric<R: Rng + ?Sized>(model: &FluctuationModel, venue: &Venue, phase_time: f64, draw: &mut R) -> Metric {
    let mut g = *Metric::minkowski().entries();
    let damp = model.damping(venue);
    let cycles = match model.mode {
        FluctuationMode::Crypto { frequency_hz } => (frequency_hz * phase_time).rem_euclid(1.0),
        FluctuationMode::Stochastic => 0.0,
    };
    for (c, &(mu, nu)) in COMPONENTS.iter().enumerate() {
        let sigma = model.sigma[mu][nu];
        if sigma == 0.0 {
            continue;
        }
        let unit = match model.mode {
            FluctuationMode::Stochastic => draw.sample::<f64, _>(StandardNormal),
            FluctuationMode::Crypto { .. } => {
                (std::f64::consts::TAU * cycles + model.phase_offset(venue, c)).cos()
            }
        };
        let delta = sigma * damp * unit;
        g[mu][nu] += delta;
        if mu != nu {
            g[nu][mu] += delta;
        }
    }
    Metric4::symmetrized(g)
}

/// Entrywise mean of one sample per venue.
pub fn region_average<R: Rng + ?Sized>(
    model: &FluctuationModel,
    venues: &[Venue],
    phase_time: f64,
    draw: &mut R,
) -> Result<Metric> {
    if venues.is_empty() {
        return Err(Error::InvalidParameter("region needs at least one venue".into()));
    }
    let samples: Vec<Metric> = venues
        .iter()
        .map(|v| sample_metric(model, v, phase_time, draw))
        .collect();
    Ok(Metric::mean(&samples).expect("non-empty region"))
}

/// `m` venues along the x¹ axis starting at the origin.
pub fn line_region(m: usize) -> Vec<Venue> {
    line_region_at(m, 0)
}

/// `m` venues along the x¹ axis on the line `x² = row`. Distinct rows give
/// disjoint regions.
pub fn line_region_at(m: usize, row: i64) -> Vec<Venue> {
    (0..m as i64)
        .map(|i| Venue {
            ix: i,
            iy: row,
            ..Venue::origin()
        })
        .collect()
}

/// Component averaged by the variance-scaling experiment: g₃₃ (0-based (2, 2)).
pub const SCALING_COMPONENT: (usize, usize) = (2, 2);

const VARIANCE_TAG: u64 = 0x5641_5249;

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceScaling {
    /// `(m, empirical variance of the volume-averaged component)`.
    pub rows: Vec<(usize, f64)>,
    /// Least-squares fit of `ln Var` against `ln m`.
    pub fit: LinearFit,
}

pub fn variance_scaling_experiment(
    model: &FluctuationModel,
    m_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<VarianceScaling> {
    variance_scaling_for_component(model, SCALING_COMPONENT, m_values, trials, seed)
}

/// Variance, across `trials` independent regions, of the region-averaged
/// component `(mu, nu)` for each region size `m`.
pub fn variance_scaling_for_component(
    model: &FluctuationModel,
    (mu, nu): (usize, usize),
    m_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<VarianceScaling> {
    model.validate()?;
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!("trials must be >= 1000, got {trials}")));
    }
    if m_values.is_empty() || m_values.contains(&0) {
        return Err(Error::InvalidParameter("m values must be non-empty and >= 1".into()));
    }
    let mut rows = Vec::with_capacity(m_values.len());
    for (k, &m) in m_values.iter().enumerate() {
        let averages: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                // each trial averages over its own region
                let venues = line_region_at(m, trial as i64);
                let path = [VARIANCE_TAG, k as u64, trial as u64];
                let mut draw = rng::stream(seed, &path);
                let phase_time = trial_phase_time(model, seed, &path);
                region_average(model, &venues, phase_time, &mut draw).map(|g| g.get(mu, nu))
            })
            .collect::<Result<_>>()?;
        rows.push((m, stats::variance(&averages)));
    }
    let xs: Vec<f64> = rows.iter().map(|(m, _)| (*m as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, v)| v.ln()).collect();
    let fit = stats::linear_fit(&xs, &ys);
    Ok(VarianceScaling { rows, fit })
}

/// Observation time for a trial. Crypto-mode trials look at the oscillation
/// at an unpredictable instant; stochastic mode ignores the time.
pub(crate) fn trial_phase_time(model: &FluctuationModel, seed: u64, path: &[u64]) -> f64 {
    match model.mode {
        FluctuationMode::Crypto { frequency_hz } => rng::unit_at(seed ^ 0x7469_6d65, path) / frequency_hz,
        FluctuationMode::Stochastic => 0.0,
    }
}

/// Probability distribution tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    origin: f64,
    step: f64,
    weights: Vec<f64>,
}

impl GridDistribution {
    /// Normalizes `weights` so they sum to one.
    pub fn new(origin: f64, step: f64, weights: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid step must be > 0, got {step}")));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must not all be zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { origin, step, weights })
    }

    pub fn point_mass(at: f64, step: f64) -> Result<Self> {
        Self::new(at, step, vec![1.0])
    }

    /// Uniform weights on `n` consecutive grid points starting at `origin`.
    pub fn uniform(origin: f64, step: f64, n: usize) -> Result<Self> {
        Self::new(origin, step, vec![1.0; n])
    }

    /// Sampled normal density `N(mean, variance)` over `±half_width` standard
    /// deviations.
    pub fn gaussian(mean: f64, variance: f64, step: f64, half_width: f64) -> Result<Self> {
        let sd = variance.sqrt();
        let n = (half_width * sd / step).ceil() as i64;
        let weights = (-n..=n)
            .map(|i| {
                let z = i as f64 * step / sd;
                (-0.5 * z * z).exp()
            })
            .collect();
        Self::new(mean - n as f64 * step, step, weights)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean();
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (self.point(i) - m).powi(k))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * self.point(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        self.central_moment(2)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let v = self.variance();
        if v == 0.0 {
            return 0.0;
        }
        self.central_moment(4) / (v * v) - 3.0
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &GridDistribution) -> Result<GridDistribution> {
        if (self.step - other.step).abs() > 1e-12 * self.step.max(other.step) {
            return Err(Error::MismatchedSteps {
                left: self.step,
                right: other.step,
            });
        }
        let mut out = vec![0.0; self.len() + other.len() - 1];
        for (i, a) in self.weights.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.weights.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        GridDistribution::new(self.origin + other.origin, self.step, out)
    }

    /// `n`-fold self-convolution: the position spread after `n` identical,
    /// independent propagation steps.
    pub fn clt_spread(&self, n: usize) -> Result<GridDistribution> {
        if n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }
}
