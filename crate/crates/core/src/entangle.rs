//! Phase-locked photon pairs with freeze-on-measurement collapse, and the
//! CHSH experiment built on them.
//!
//! Both members of a pair leave one venue locked to the same torsional
//! oscillation. Measuring either one freezes the shared oscillation: on a
//! pass at the measurement axis, on absorption at the orthogonal axis. The
//! partner is then measured against the frozen angle with fresh phases.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::oscillator::{self, axis_difference, PassRule};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LockMode {
    #[default]
    InPhase,
    PiOffset,
}

impl LockMode {
    fn offset(self) -> f64 {
        match self {
            LockMode::InPhase => 0.0,
            LockMode::PiOffset => PI,
        }
    }
}

/// Which member is measured first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    #[default]
    FirstThenSecond,
    SecondThenFirst,
}

/// How outcomes are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationRule {
    /// Hidden-phase gates with nonlocal collapse.
    #[default]
    Collapse,
    /// No collapse: each outcome is `sign cos 2(angle − λ)` of the pre-shared
    /// polarization only. A local hidden-variable model.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntangledPair {
    pub shared_pol: f64,
    pub phase_xy: f64,
    pub phase_tz: f64,
    pub id: u64,
    pub lock_mode: LockMode,
    collapsed: Option<f64>,
    key: u64,
}

const PAIR_TAG: u64 = 0x5041_4952;
const COLLAPSE_TAG: u64 = 0x434f_4c4c;
const CHSH_TAG: u64 = 0x4348_5348;

impl EntangledPair {
    pub fn new(id: u64, seed: u64, lock_mode: LockMode) -> Self {
        let key = rng::hash(seed, &[PAIR_TAG, id]);
        Self {
            shared_pol: PI * rng::unit_at(key, &[0]),
            phase_xy: rng::unit_at(key, &[1]),
            phase_tz: rng::unit_at(key, &[2]),
            id,
            lock_mode,
            collapsed: None,
            key,
        }
    }

    pub fn collapsed(&self) -> Option<f64> {
        self.collapsed
    }

    /// Oscillation angle reported by member 0 or 1: the shared angle (plus
    /// the lock offset for member 1) before collapse, the frozen angle after.
    pub fn member_angle(&self, member: usize) -> f64 {
        let base = self.collapsed.unwrap_or(self.shared_pol);
        if member == 0 {
            base
        } else {
            base + self.lock_mode.offset()
        }
    }
}

pub fn entangled_pair_source(n: usize, seed: u64, lock_mode: LockMode) -> Result<impl Iterator<Item = EntangledPair>> {
    if n == 0 {
        return Err(Error::InvalidParameter("pair source needs n >= 1".into()));
    }
    Ok((0..n as u64).map(move |id| EntangledPair::new(id, seed, lock_mode)))
}

/// Outcomes `(member 0, member 1)` as ±1, whatever the order.
pub fn measure_entangled(pair: &mut EntangledPair, angle_first: f64, angle_second: f64, order: Order) -> Result<(i8, i8)> {
    if pair.collapsed.is_some() {
        return Err(Error::AlreadyMeasured);
    }
    let angles = [angle_first, angle_second];
    let lead = match order {
        Order::FirstThenSecond => 0,
        Order::SecondThenFirst => 1,
    };
    let trail = 1 - lead;

    let delta = axis_difference(angles[lead], pair.member_angle(lead));
    let lead_passed = oscillator::gates_pass(pair.phase_xy, pair.phase_tz, delta, PassRule::TwoGate);
    let frozen = if lead_passed { angles[lead] } else { angles[lead] + FRAC_PI_2 };
    // store the frozen angle in member-0 terms
    pair.collapsed = Some(if lead == 0 { frozen } else { frozen - pair.lock_mode.offset() });

    let delta = axis_difference(angles[trail], pair.member_angle(trail));
    let fresh_xy = rng::unit_at(pair.key, &[COLLAPSE_TAG, 0]);
    let fresh_tz = rng::unit_at(pair.key, &[COLLAPSE_TAG, 1]);
    let trail_passed = oscillator::gates_pass(fresh_xy, fresh_tz, delta, PassRule::TwoGate);

    let sign = |b: bool| if b { 1 } else { -1 };
    let mut out = [0i8; 2];
    out[lead] = sign(lead_passed);
    out[trail] = sign(trail_passed);
    Ok((out[0], out[1]))
}

/// Local control: each member's outcome depends only on its own angle and
/// the pair's pre-shared polarization.
pub fn measure_classical(pair: &EntangledPair, angle_first: f64, angle_second: f64) -> (i8, i8) {
    let sign = |angle: f64, member: usize| {
        if (2.0 * (angle - pair.member_angle(member))).cos() >= 0.0 {
            1
        } else {
            -1
        }
    };
    (sign(angle_first, 0), sign(angle_second, 1))
}

pub const MIN_CHSH_PAIRS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub angle_first: f64,
    pub angle_second: f64,
    pub n: u64,
    /// Σ outcome products.
    pub sum: i64,
}

impl Correlation {
    pub fn value(&self) -> f64 {
        self.sum as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshReport {
    /// Settings (a,b), (a,b′), (a′,b), (a′,b′).
    pub correlations: [Correlation; 4],
    pub s: f64,
}

/// Correlation `E(a, b)` over `n` fresh pairs drawn for `setting`.
pub fn correlation(
    a: f64,
    b: f64,
    n: usize,
    seed: u64,
    setting: u64,
    lock_mode: LockMode,
    rule: CorrelationRule,
) -> Result<Correlation> {
    let pair_seed = rng::hash(seed, &[CHSH_TAG, setting]);
    let sum = (0..n as u64)
        .into_par_iter()
        .map(|id| {
            let mut pair = EntangledPair::new(id, pair_seed, lock_mode);
            let (x, y) = match rule {
                CorrelationRule::Collapse => measure_entangled(&mut pair, a, b, Order::FirstThenSecond)?,
                CorrelationRule::Classical => measure_classical(&pair, a, b),
            };
            Ok(i64::from(x * y))
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    Ok(Correlation {
        angle_first: a,
        angle_second: b,
        n: n as u64,
        sum,
    })
}

pub fn chsh_experiment(a: f64, a_prime: f64, b: f64, b_prime: f64, n: usize, seed: u64) -> Result<ChshReport> {
    chsh_experiment_with(a, a_prime, b, b_prime, n, seed, LockMode::InPhase, CorrelationRule::Collapse)
}

/// `S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|` with fresh pairs per setting.
#[allow(clippy::too_many_arguments)]
pub fn chsh_experiment_with(
    a: f64,
    a_prime: f64,
    b: f64,
    b_prime: f64,
    n: usize,
    seed: u64,
    lock_mode: LockMode,
    rule: CorrelationRule,
) -> Result<ChshReport> {
    if n < MIN_CHSH_PAIRS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_CHSH_PAIRS} pairs per setting, got {n}")));
    }
    let settings = [(a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime)];
    let mut correlations = [Correlation {
        angle_first: 0.0,
        angle_second: 0.0,
        n: 0,
        sum: 0,
    }; 4];
    for (k, &(x, y)) in settings.iter().enumerate() {
        correlations[k] = correlation(x, y, n, seed, k as u64, lock_mode, rule)?;
    }
    let e = correlations.map(|c| c.value());
    Ok(ChshReport {
        correlations,
        s: (e[0] - e[1] + e[2] + e[3]).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use std::f64::consts::FRAC_PI_8;

    #[test]
    fn source_is_deterministic_and_uniform() {
        let a: Vec<_> = entangled_pair_source(100_000, 7, LockMode::InPhase).unwrap().collect();
        let b: Vec<_> = entangled_pair_source(100_000, 7, LockMode::InPhase).unwrap().collect();
        assert_eq!(a, b);
        let pols: Vec<f64> = a.iter().map(|p| p.shared_pol).collect();
        assert!(stats::ks_uniform(&pols, 0.0, PI).p_value > 0.01);
        assert!(entangled_pair_source(0, 7, LockMode::InPhase).is_err());
    }

    #[test]
    fn pi_offset_members_differ_by_pi() {
        for p in entangled_pair_source(100, 3, LockMode::PiOffset).unwrap() {
            assert_eq!(p.member_angle(1), p.member_angle(0) + PI);
        }
        for p in entangled_pair_source(100, 3, LockMode::InPhase).unwrap() {
            assert_eq!(p.member_angle(1), p.member_angle(0));
        }
    }

    #[test]
    fn equal_angles_always_agree() {
        for lock in [LockMode::InPhase, LockMode::PiOffset] {
            for order in [Order::FirstThenSecond, Order::SecondThenFirst] {
                for mut p in entangled_pair_source(20_000, 1, lock).unwrap() {
                    let (x, y) = measure_entangled(&mut p, 0.4, 0.4, order).unwrap();
                    assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn orthogonal_angles_always_disagree() {
        for mut p in entangled_pair_source(20_000, 2, LockMode::InPhase).unwrap() {
            let (x, y) = measure_entangled(&mut p, 0.1, 0.1 + FRAC_PI_2, Order::FirstThenSecond).unwrap();
            assert_eq!(x, -y);
        }
    }

    #[test]
    fn collapse_freezes_both_members_once() {
        let mut p = EntangledPair::new(5, 9, LockMode::PiOffset);
        let (x, _) = measure_entangled(&mut p, 0.3, 1.0, Order::FirstThenSecond).unwrap();
        let frozen = p.collapsed().unwrap();
        let expect = if x == 1 { 0.3 } else { 0.3 + FRAC_PI_2 };
        assert_eq!(frozen, expect);
        assert_eq!(p.member_angle(0), frozen);
        assert_eq!(p.member_angle(1), frozen + PI);
        assert_eq!(
            measure_entangled(&mut p, 0.3, 1.0, Order::FirstThenSecond),
            Err(Error::AlreadyMeasured)
        );
    }

    #[test]
    fn reversed_order_freezes_at_second_angle() {
        let mut p = EntangledPair::new(8, 4, LockMode::InPhase);
        let (_, y) = measure_entangled(&mut p, 0.3, 1.0, Order::SecondThenFirst).unwrap();
        let expect = if y == 1 { 1.0 } else { 1.0 + FRAC_PI_2 };
        assert_eq!(p.collapsed(), Some(expect));
    }

    #[test]
    fn correlation_follows_cos_two_delta() {
        for (a, b) in [(0.0, FRAC_PI_8), (0.2, 1.1), (0.0, FRAC_PI_2 / 3.0)] {
            let c = correlation(a, b, 1_000_000, 13, 0, LockMode::InPhase, CorrelationRule::Collapse).unwrap();
            let expect = (2.0f64 * (a - b)).cos();
            assert!((c.value() - expect).abs() < 0.005, "E({a},{b}) = {}", c.value());
        }
    }

    #[test]
    fn chsh_reaches_tsirelson_bound() {
        let r = chsh_experiment(0.0, PI / 4.0, FRAC_PI_8, 3.0 * FRAC_PI_8, 1_000_000, 29).unwrap();
        assert!((r.s - 2.0 * 2f64.sqrt()).abs() < 0.02, "S = {}", r.s);
        // more than 20 standard errors above the local bound
        let se = r.correlations.iter().map(|c| (1.0 - c.value().powi(2)) / c.n as f64).sum::<f64>().sqrt();
        assert!(r.s - 2.0 > 20.0 * se);
    }

    #[test]
    fn equal_angles_give_s_of_two() {
        let r = chsh_experiment(0.5, 0.5, 0.5, 0.5, 100_000, 3).unwrap();
        assert_eq!(r.s, 2.0);
    }

    #[test]
    fn classical_control_respects_bell_bound() {
        for lock in [LockMode::InPhase, LockMode::PiOffset] {
            let r = chsh_experiment_with(
                0.0,
                PI / 4.0,
                FRAC_PI_8,
                3.0 * FRAC_PI_8,
                1_000_000,
                29,
                lock,
                CorrelationRule::Classical,
            )
            .unwrap();
            assert!(r.s <= 2.02, "S = {}", r.s);
        }
    }

    #[test]
    fn small_runs_are_rejected() {
        assert!(chsh_experiment(0.0, 0.0, 0.0, 0.0, 99_999, 0).is_err());
    }
}
