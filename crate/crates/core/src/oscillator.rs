//! Torsional-oscillation photon model.
//!
//! A photon carries a polarization angle and two hidden oscillation phases,
//! one for the x–y torsion and one for the t–z torsion. A polarizer lets it
//! through only if each phase falls under `|cos Δ|`, so a uniform ensemble of
//! phases reproduces `cos²Δ`. Everything is a pure function of the run seed
//! and the photon's index: no generator state is shared between photons.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::{rng, stats, Error, Result, Scalar};

/// `θ(t) = k·cos(ωt + φ)`.
pub fn torsion_angle<T: Scalar>(k: T, omega: T, phi: T, t: T) -> T {
    k * (omega * t + phi).cos()
}

/// `dθ/dt = −kω·sin(ωt + φ)`.
pub fn torsion_rate<T: Scalar>(k: T, omega: T, phi: T, t: T) -> T {
    -k * omega * (omega * t + phi).sin()
}

/// Reduces an axial angle to `[0, π)`.
pub fn normalize_axis(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Angle between two axes folded onto `[0, π/2]`.
pub fn axis_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    if d > FRAC_PI_2 {
        PI - d
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photon {
    pub pol: f64,
    pub phase_xy: f64,
    pub phase_tz: f64,
    pub alive: bool,
    pub id: u64,
    /// Polarizers passed so far; indexes the next phase refresh.
    pub encounters: u64,
    key: u64,
}

const SOURCE_TAG: u64 = 0x534f_5552;
const REFRESH_TAG: u64 = 0x5245_4652;

impl Photon {
    /// Photon `id` of the source seeded with `seed`, polarized at `pol`.
    pub fn new(pol: f64, id: u64, seed: u64) -> Self {
        let key = rng::hash(seed, &[SOURCE_TAG, id]);
        Self {
            pol: normalize_axis(pol),
            phase_xy: rng::unit_at(key, &[0]),
            phase_tz: rng::unit_at(key, &[1]),
            alive: true,
            id,
            encounters: 0,
            key,
        }
    }

    /// Phases after the `encounters`-th preparation.
    fn refresh(&mut self) {
        self.encounters += 1;
        self.phase_xy = rng::unit_at(self.key, &[REFRESH_TAG, self.encounters, 0]);
        self.phase_tz = rng::unit_at(self.key, &[REFRESH_TAG, self.encounters, 1]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    Fixed(f64),
    Unpolarized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSource {
    pub kind: SourceKind,
    pub seed: u64,
}

impl PhotonSource {
    pub fn new(kind: SourceKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// The `id`-th photon; random access, no sequential state.
    pub fn photon(&self, id: u64) -> Photon {
        let pol = match self.kind {
            SourceKind::Fixed(angle) => angle,
            SourceKind::Unpolarized => PI * rng::unit_at(self.seed, &[SOURCE_TAG, id, 2]),
        };
        Photon::new(pol, id, self.seed)
    }
}

pub fn photon_source(kind: SourceKind, n: usize, seed: u64) -> Result<impl Iterator<Item = Photon>> {
    if n == 0 {
        return Err(Error::InvalidParameter("photon source needs n >= 1".into()));
    }
    let source = PhotonSource::new(kind, seed);
    Ok((0..n as u64).map(move |id| source.photon(id)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarizer {
    axis: f64,
}

impl Polarizer {
    pub fn new(axis: f64) -> Self {
        Self {
            axis: normalize_axis(axis),
        }
    }

    pub fn axis(&self) -> f64 {
        self.axis
    }
}

/// Which oscillation gates a polarizer applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PassRule {
    /// Both the x–y and t–z gates: `cos²Δ`.
    #[default]
    TwoGate,
    /// Only the x–y gate: `|cos Δ|`.
    SpatialOnly,
}

/// Hidden-phase test against `|cos Δ|`, shared with the entangled-pair rule.
pub(crate) fn gates_pass(phase_xy: f64, phase_tz: f64, delta: f64, rule: PassRule) -> bool {
    let c = delta.cos().abs();
    match rule {
        PassRule::TwoGate => phase_xy < c && phase_tz < c,
        PassRule::SpatialOnly => phase_xy < c,
    }
}

pub fn polarizer_pass(ph: Photon, pol: &Polarizer) -> (bool, Photon) {
    polarizer_pass_with(ph, pol, PassRule::TwoGate)
}

/// A transmitted photon leaves polarized along the axis with refreshed
/// phases; an absorbed one is marked dead.
pub fn polarizer_pass_with(ph: Photon, pol: &Polarizer, rule: PassRule) -> (bool, Photon) {
    let mut out = ph;
    if !ph.alive {
        return (false, out);
    }
    let delta = axis_difference(ph.pol, pol.axis);
    if gates_pass(ph.phase_xy, ph.phase_tz, delta, rule) {
        out.pol = pol.axis;
        out.refresh();
        (true, out)
    } else {
        out.alive = false;
        (false, out)
    }
}

pub const MIN_EXPERIMENT_PHOTONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalusRow {
    pub delta: f64,
    pub n: u64,
    pub passed: u64,
    pub fraction: f64,
    pub expected: f64,
    /// Binomial standard error at the expected fraction.
    pub std_error: f64,
}

impl MalusRow {
    /// `|fraction − expected|` in standard errors; 0 when both are exact.
    pub fn z_score(&self) -> f64 {
        let dev = (self.fraction - self.expected).abs();
        if dev == 0.0 {
            0.0
        } else {
            dev / self.std_error
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_EXPERIMENT_PHOTONS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_EXPERIMENT_PHOTONS} photons, got {n}"
        )));
    }
    Ok(())
}

pub fn malus_experiment(deltas: &[f64], n: usize, seed: u64) -> Result<Vec<MalusRow>> {
    malus_experiment_with(deltas, n, seed, PassRule::TwoGate)
}

/// Photons polarized at 0 against a polarizer at each `Δ`. The same photon
/// stream is reused for every angle.
pub fn malus_experiment_with(deltas: &[f64], n: usize, seed: u64, rule: PassRule) -> Result<Vec<MalusRow>> {
    check_n(n)?;
    let source = PhotonSource::new(SourceKind::Fixed(0.0), seed);
    Ok(deltas
        .iter()
        .map(|&delta| {
            let polarizer = Polarizer::new(delta);
            let passed = (0..n as u64)
                .into_par_iter()
                .filter(|&id| polarizer_pass_with(source.photon(id), &polarizer, rule).0)
                .count() as u64;
            let c = axis_difference(0.0, polarizer.axis).cos();
            let expected = match rule {
                PassRule::TwoGate => c * c,
                PassRule::SpatialOnly => c,
            };
            MalusRow {
                delta,
                n: n as u64,
                passed,
                fraction: passed as f64 / n as f64,
                expected,
                std_error: stats::binomial_se(expected, n as u64),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub axes: Vec<f64>,
    pub source_count: u64,
    /// Survivors after each polarizer.
    pub stage_counts: Vec<u64>,
}

impl ChainReport {
    pub fn final_count(&self) -> u64 {
        *self.stage_counts.last().unwrap_or(&self.source_count)
    }

    pub fn fraction_of_source(&self) -> f64 {
        self.final_count() as f64 / self.source_count as f64
    }

    /// Final survivors relative to those that passed the first polarizer.
    pub fn fraction_of_first(&self) -> f64 {
        match self.stage_counts.first() {
            Some(0) => 0.0,
            Some(&first) => self.final_count() as f64 / first as f64,
            None => 1.0,
        }
    }
}

pub fn polarizer_chain(axes: &[f64], kind: SourceKind, n: usize, seed: u64) -> Result<ChainReport> {
    check_n(n)?;
    if axes.is_empty() {
        return Err(Error::InvalidParameter("polarizer chain needs at least one axis".into()));
    }
    let source = PhotonSource::new(kind, seed);
    let polarizers: Vec<Polarizer> = axes.iter().map(|&a| Polarizer::new(a)).collect();
    let stages = polarizers.len();
    // number of polarizers each photon gets through
    let depth_counts = (0..n as u64)
        .into_par_iter()
        .map(|id| {
            let mut ph = source.photon(id);
            let mut depth = 0;
            for p in &polarizers {
                let (passed, out) = polarizer_pass(ph, p);
                if !passed {
                    break;
                }
                ph = out;
                depth += 1;
            }
            let mut hist = vec![0u64; stages + 1];
            hist[depth] = 1;
            hist
        })
        .reduce(
            || vec![0u64; stages + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let stage_counts = (1..=stages).map(|s| depth_counts[s..].iter().sum()).collect();
    Ok(ChainReport {
        axes: axes.to_vec(),
        source_count: n as u64,
        stage_counts,
    })
}
