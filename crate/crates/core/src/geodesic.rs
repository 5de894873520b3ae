//! Test-particle propagation through a (fluctuating) metric with the geodesic
//! equation `ẍⁱ + Γⁱⱼₖ ẋʲ ẋᵏ = 0`, and the free-particle spreading ensemble.

use rayon::prelude::*;

use crate::field::{self, FluctuationModel, Venue};
use crate::metric::Metric4;
use crate::rng;
use crate::stats::{self, Histogram, LinearFit};
use crate::{Error, Metric, Result, Scalar};

pub const DEFAULT_SPACING: f64 = 0.5;
pub const DEFAULT_DS: f64 = 0.1;
/// Coordinates beyond this many grains count as a diverged integration.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Anything that can report the metric at a continuous coordinate point.
pub trait MetricField<T> {
    fn metric_at(&self, x: &[T; 4]) -> Result<Metric4<T>>;
}

/// Exact Minkowski space.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl<T: Scalar> MetricField<T> for Flat {
    fn metric_at(&self, _: &[T; 4]) -> Result<Metric4<T>> {
        Ok(Metric4::minkowski())
    }
}

/// Adapts a closure into a [`MetricField`].
pub struct FnField<F>(pub F);

impl<T, F> MetricField<T> for FnField<F>
where
    F: Fn(&[T; 4]) -> Metric4<T>,
{
    fn metric_at(&self, x: &[T; 4]) -> Result<Metric4<T>> {
        Ok((self.0)(x))
    }
}

/// Fluctuating field frozen for one propagation step: the affine interpolant
/// through the sampled metrics at a venue and its four forward neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenField {
    anchor: [f64; 4],
    grain: f64,
    base: Metric,
    gradient: [[[f64; 4]; 4]; 4],
}

impl FrozenField {
    /// Draws the five venue samples from `draw` in the order: venue, then
    /// `+x¹, +x², +x³, +x⁴` neighbours.
    pub fn sample<R: rand::Rng + ?Sized>(
        model: &FluctuationModel,
        venue: &Venue,
        phase_time: f64,
        draw: &mut R,
    ) -> Self {
        let base = field::sample_metric(model, venue, phase_time, draw);
        let mut gradient = [[[0.0; 4]; 4]; 4];
        for (axis, slope) in gradient.iter_mut().enumerate() {
            let neighbour = field::sample_metric(model, &venue.offset(axis, 1), phase_time, draw);
            for (mu, row) in slope.iter_mut().enumerate() {
                for (nu, v) in row.iter_mut().enumerate() {
                    *v = (neighbour.get(mu, nu) - base.get(mu, nu)) / venue.grain;
                }
            }
        }
        let anchor = venue.indices().map(|i| i as f64 * venue.grain);
        Self {
            anchor,
            grain: venue.grain,
            base,
            gradient,
        }
    }

    pub fn grain(&self) -> f64 {
        self.grain
    }
}

impl MetricField<f64> for FrozenField {
    fn metric_at(&self, x: &[f64; 4]) -> Result<Metric> {
        let mut g = *self.base.entries();
        for (axis, slope) in self.gradient.iter().enumerate() {
            let dx = x[axis] - self.anchor[axis];
            for (row, srow) in g.iter_mut().zip(slope) {
                for (v, s) in row.iter_mut().zip(srow) {
                    *v += s * dx;
                }
            }
        }
        Ok(Metric4::symmetrized(g))
    }
}

/// Position and 4-velocity `dx/ds` of a test particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState<T> {
    pub x: [T; 4],
    pub u: [T; 4],
}

impl<T: Scalar> ParticleState<T> {
    pub fn new(x: [T; 4], u: [T; 4]) -> Self {
        Self { x, u }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.u).all(|v| v.is_finite())
    }
}

/// Christoffel symbols of the second kind, `gamma[i][j][k] = Γⁱⱼₖ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelSet<T> {
    pub gamma: [[[T; 4]; 4]; 4],
}

impl<T: Scalar> ChristoffelSet<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.gamma[i][j][k]
    }

    /// `aⁱ = −Γⁱⱼₖ uʲ uᵏ`.
    pub fn acceleration(&self, u: &[T; 4]) -> [T; 4] {
        let mut a = [T::zero(); 4];
        for (ai, gi) in a.iter_mut().zip(&self.gamma) {
            let mut acc = T::zero();
            for (j, gij) in gi.iter().enumerate() {
                for (k, g) in gij.iter().enumerate() {
                    acc = acc + *g * u[j] * u[k];
                }
            }
            *ai = -acc;
        }
        a
    }
}

fn checked_metric<T: Scalar, F: MetricField<T> + ?Sized>(field: &F, x: &[T; 4]) -> Result<Metric4<T>> {
    let g = field.metric_at(x)?;
    let det = g.determinant();
    if !(det.abs() >= T::lit(1e-9)) {
        return Err(Error::SingularMetric {
            det: det.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(g)
}

/// `Γⁱⱼₖ = ½ g^{il}(∂ⱼg_{lk} + ∂ₖg_{lj} − ∂ₗg_{jk})` with central differences
/// of step `spacing`.
pub fn christoffel<T: Scalar, F: MetricField<T> + ?Sized>(field: &F, x: &[T; 4], spacing: T) -> Result<ChristoffelSet<T>> {
    let inv = checked_metric(field, x)?.inverse()?;
    let two_h = spacing + spacing;
    // dg[l][a][b] = ∂ₗ g_ab
    let mut dg = [[[T::zero(); 4]; 4]; 4];
    for (l, d) in dg.iter_mut().enumerate() {
        let mut fwd = *x;
        let mut bwd = *x;
        fwd[l] = fwd[l] + spacing;
        bwd[l] = bwd[l] - spacing;
        let gp = checked_metric(field, &fwd)?;
        let gm = checked_metric(field, &bwd)?;
        for (a, row) in d.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = (gp.get(a, b) - gm.get(a, b)) / two_h;
            }
        }
    }
    let half = T::lit(0.5);
    let mut gamma = [[[T::zero(); 4]; 4]; 4];
    for (i, gi) in gamma.iter_mut().enumerate() {
        for j in 0..4 {
            for k in j..4 {
                let mut acc = T::zero();
                for l in 0..4 {
                    acc = acc + inv.get(i, l) * (dg[j][l][k] + dg[k][l][j] - dg[l][j][k]);
                }
                gi[j][k] = half * acc;
                gi[k][j] = half * acc;
            }
        }
    }
    Ok(ChristoffelSet { gamma })
}

fn derivative<T: Scalar, F: MetricField<T> + ?Sized>(
    field: &F,
    x: &[T; 4],
    u: &[T; 4],
    spacing: T,
) -> Result<([T; 4], [T; 4])> {
    let a = christoffel(field, x, spacing)?.acceleration(u);
    Ok((*u, a))
}

fn axpy<T: Scalar>(base: &[T; 4], h: T, d: &[T; 4]) -> [T; 4] {
    let mut out = *base;
    for (o, v) in out.iter_mut().zip(d) {
        *o = *o + h * *v;
    }
    out
}

/// One classic fourth-order Runge-Kutta step of the first-order system
/// `dx/ds = u`, `du/ds = −Γ(x) u u`.
pub fn rk4_step<T: Scalar, F: MetricField<T> + ?Sized>(
    field: &F,
    state: &ParticleState<T>,
    ds: T,
    spacing: T,
) -> Result<ParticleState<T>> {
    let half = ds * T::lit(0.5);
    let (k1x, k1u) = derivative(field, &state.x, &state.u, spacing)?;
    let (k2x, k2u) = derivative(field, &axpy(&state.x, half, &k1x), &axpy(&state.u, half, &k1u), spacing)?;
    let (k3x, k3u) = derivative(field, &axpy(&state.x, half, &k2x), &axpy(&state.u, half, &k2u), spacing)?;
    let (k4x, k4u) = derivative(field, &axpy(&state.x, ds, &k3x), &axpy(&state.u, ds, &k3u), spacing)?;
    let sixth = ds / T::lit(6.0);
    let two = T::lit(2.0);
    let mut next = *state;
    for i in 0..4 {
        next.x[i] = next.x[i] + sixth * (k1x[i] + two * k2x[i] + two * k3x[i] + k4x[i]);
        next.u[i] = next.u[i] + sixth * (k1u[i] + two * k2u[i] + two * k3u[i] + k4u[i]);
    }
    check_divergence(&next)?;
    Ok(next)
}

fn check_divergence<T: Scalar>(state: &ParticleState<T>) -> Result<()> {
    let limit = T::lit(DIVERGENCE_LIMIT);
    for (i, v) in state.x.iter().enumerate() {
        if !(v.abs() <= limit) {
            return Err(Error::Diverged {
                coordinate: i + 1,
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    if !state.is_finite() {
        return Err(Error::Diverged {
            coordinate: 0,
            value: f64::NAN,
        });
    }
    Ok(())
}

/// Integrates `steps` RK4 steps of size `ds`, returning every state
/// including the initial one.
pub fn integrate_geodesic<T: Scalar, F: MetricField<T> + ?Sized>(
    field: &F,
    state0: ParticleState<T>,
    steps: usize,
    ds: T,
) -> Result<Vec<ParticleState<T>>> {
    integrate_geodesic_with(field, state0, steps, ds, T::lit(DEFAULT_SPACING))
}

pub fn integrate_geodesic_with<T: Scalar, F: MetricField<T> + ?Sized>(
    field: &F,
    state0: ParticleState<T>,
    steps: usize,
    ds: T,
    spacing: T,
) -> Result<Vec<ParticleState<T>>> {
    if steps == 0 || !(ds > T::zero()) {
        return Err(Error::InvalidParameter("need steps >= 1 and ds > 0".into()));
    }
    let mut path = Vec::with_capacity(steps + 1);
    path.push(state0);
    let mut state = state0;
    for _ in 0..steps {
        state = rk4_step(field, &state, ds, spacing)?;
        path.push(state);
    }
    Ok(path)
}

/// Settings for the free-particle ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_particles: usize,
    pub steps: usize,
    pub ds: f64,
    pub spacing: f64,
    pub grain: f64,
    /// Nominal 4-velocity every step starts from.
    pub initial_velocity: [f64; 4],
    pub histogram_bins: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_particles: 10_000,
            steps: 200,
            ds: DEFAULT_DS,
            spacing: DEFAULT_SPACING,
            grain: 1.0,
            initial_velocity: [0.0, 0.0, 0.1, 1.0],
            histogram_bins: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadReport {
    /// Cross-particle variance of x³ after each step (index 0 = start).
    pub variance: Vec<f64>,
    /// Least-squares fit of variance against step count.
    pub fit: LinearFit,
    /// `fit.slope / ds`.
    pub slope_per_ds: f64,
    pub final_positions: Vec<f64>,
    pub final_histogram: Histogram,
    pub excess_kurtosis: f64,
}

const ENSEMBLE_TAG: u64 = 0x4745_4f44;

/// Free-particle spreading with the default ensemble settings.
pub fn free_particle_ensemble(
    model: &FluctuationModel,
    n_particles: usize,
    steps: usize,
    ds: f64,
    seed: u64,
) -> Result<SpreadReport> {
    let config = EnsembleConfig {
        n_particles,
        steps,
        ds,
        ..EnsembleConfig::default()
    };
    free_particle_ensemble_with(model, &config, seed)
}

/// Propagates independent test particles from the origin.
///
/// Each step freezes a fresh field sample around the particle's venue,
/// integrates one geodesic step from the current position with the nominal
/// 4-velocity, and keeps the displaced position. Successive displacements are
/// therefore independent draws from the same one-step distribution, whose
/// repeated convolution is the spreading law being measured.
pub fn free_particle_ensemble_with(model: &FluctuationModel, config: &EnsembleConfig, seed: u64) -> Result<SpreadReport> {
    model.validate()?;
    if config.n_particles < 1000 {
        return Err(Error::InvalidParameter(format!(
            "n_particles must be >= 1000, got {}",
            config.n_particles
        )));
    }
    if config.steps == 0 || !(config.ds > 0.0) || !(config.spacing > 0.0) || !(config.grain > 0.0) {
        return Err(Error::InvalidParameter("need steps >= 1 and positive ds, spacing, grain".into()));
    }
    let tracks: Vec<Vec<f64>> = (0..config.n_particles)
        .into_par_iter()
        .map(|p| particle_track(model, config, seed, p as u64))
        .collect::<Result<_>>()?;

    let variance: Vec<f64> = (0..=config.steps)
        .map(|s| {
            let column: Vec<f64> = tracks.iter().map(|t| t[s]).collect();
            stats::variance(&column)
        })
        .collect();
    let xs: Vec<f64> = (0..=config.steps).map(|s| s as f64).collect();
    let fit = stats::linear_fit(&xs, &variance);
    let final_positions: Vec<f64> = tracks.iter().map(|t| t[config.steps]).collect();
    Ok(SpreadReport {
        slope_per_ds: fit.slope / config.ds,
        fit,
        excess_kurtosis: stats::excess_kurtosis(&final_positions),
        final_histogram: Histogram::from_samples(&final_positions, config.histogram_bins),
        final_positions,
        variance,
    })
}

fn particle_track(model: &FluctuationModel, config: &EnsembleConfig, seed: u64, particle: u64) -> Result<Vec<f64>> {
    let mut x = [0.0; 4];
    let mut track = Vec::with_capacity(config.steps + 1);
    track.push(x[2]);
    for step in 0..config.steps {
        let path = [ENSEMBLE_TAG, particle, step as u64];
        let mut draw = rng::stream(seed, &path);
        let phase_time = field::trial_phase_time(model, seed, &path);
        // The whole ensemble shares one venue per step, taken from the
        // unperturbed straight line; the spread is far below the grain.
        let nominal: [f64; 4] = std::array::from_fn(|i| config.initial_velocity[i] * config.ds * step as f64);
        let venue = Venue::containing(&nominal, config.grain);
        let frozen = FrozenField::sample(model, &venue, phase_time, &mut draw);
        let state = ParticleState::new(x, config.initial_velocity);
        x = rk4_step(&frozen, &state, config.ds, config.spacing)?.x;
        track.push(x[2]);
    }
    Ok(track)
}
