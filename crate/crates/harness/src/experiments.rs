//! Dispatch from an [`ExperimentSpec`] to the core experiments.
//!
//! Running is split in two: [`Plan::from_spec`] parses and validates every
//! parameter without doing any work, then [`Plan::execute`] computes. A spec
//! that fails validation therefore never leaves partial output behind.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8, TAU};

use cml_core::entangle::{self, CorrelationRule, LockMode};
use cml_core::field::{self, FluctuationMode, FluctuationModel};
use cml_core::geodesic::{self, EnsembleConfig};
use cml_core::measurement::{self, CovariantDistance, Refinement};
use cml_core::metric::interference_density;
use cml_core::oscillator::{self, PassRule, SourceKind};
use cml_core::slit::{self, SlitGeometry};
use cml_core::uncertainty;
use serde_json::json;

use crate::error::{HarnessError, Result};
use crate::output::{num, ExperimentResult, Table};
use crate::spec::{ExperimentKind, ExperimentSpec, Params};

/// `1, 2, 4, …, 256`.
pub fn default_m_values() -> Vec<usize> {
    (0..=8).map(|k| 1 << k).collect()
}

pub const DEFAULT_MALUS_DELTAS: [f64; 5] = [0.0, FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, FRAC_PI_2];

#[derive(Debug, Clone)]
enum Plan {
    InterferenceGrid {
        n: usize,
    },
    VarianceScaling {
        model: FluctuationModel,
        m_values: Vec<usize>,
        trials: usize,
        seed: u64,
    },
    Spread {
        model: FluctuationModel,
        config: EnsembleConfig,
        seed: u64,
    },
    Uncertainty {
        model: FluctuationModel,
        m_values: Vec<usize>,
        p_cov: [f64; 4],
        component: usize,
        grain: f64,
        trials: usize,
        seed: u64,
    },
    Malus {
        deltas: Vec<f64>,
        n: usize,
        rule: PassRule,
        seed: u64,
    },
    Chain {
        axes: Vec<f64>,
        source: SourceKind,
        n: usize,
        seed: u64,
    },
    Chsh {
        angles: [f64; 4],
        n: usize,
        lock: LockMode,
        rule: CorrelationRule,
        seed: u64,
    },
    Twoslit {
        geometry: SlitGeometry,
        n: usize,
        seed: u64,
    },
    Schwarzschild {
        r_bar: f64,
        gm: f64,
        refinement: Refinement,
    },
    Measurement {
        v: f64,
        x_f: f64,
        x_b: f64,
        t0: f64,
    },
}

const MODEL_KEYS: [&str; 4] = ["mode", "frequency_hz", "sigma", "sigma_time"];

fn with_model_keys<'a>(keys: &[&'a str]) -> Vec<&'a str> {
    keys.iter().copied().chain(MODEL_KEYS).collect()
}

fn config_err(msg: String) -> HarnessError {
    HarnessError::Config(msg)
}

fn model_from(p: &Params, seed: u64) -> Result<FluctuationModel> {
    let mut model = FluctuationModel::quiet();
    match p.str("mode", "stochastic")? {
        "stochastic" => {}
        "crypto" => {
            model.mode = FluctuationMode::Crypto {
                frequency_hz: p.f64("frequency_hz", field::DEFAULT_FREQUENCY_HZ)?,
            };
            model.phase_seed = seed;
        }
        other => return Err(config_err(format!("mode must be 'stochastic' or 'crypto', got '{other}'"))),
    }
    let sigma = p.f64("sigma", field::DEFAULT_SIGMA)?;
    let sigma_time = p.f64("sigma_time", 0.0)?;
    let model = (0..3).try_fold(model, |m, i| m.with_sigma(i, i, sigma))?.with_sigma(3, 3, sigma_time)?;
    model.validate()?;
    Ok(model)
}

fn check_m_values(m: &[usize]) -> Result<()> {
    if m.is_empty() || m.contains(&0) {
        return Err(config_err("m_values must be a non-empty list of positive integers".into()));
    }
    Ok(())
}

fn at_least(name: &str, value: usize, min: usize) -> Result<()> {
    if value < min {
        return Err(config_err(format!("{name} must be >= {min}, got {value}")));
    }
    Ok(())
}

impl Plan {
    fn from_spec(spec: &ExperimentSpec) -> Result<Plan> {
        let seed = if spec.experiment.is_stochastic() {
            spec.require_seed()?
        } else {
            spec.seed.unwrap_or(0)
        };
        let map = &spec.params;
        let plan = match spec.experiment {
            ExperimentKind::InterferenceGrid => {
                let p = Params::new(map, &["n"])?;
                let n = p.usize("n", 100)?;
                at_least("n", n, 1)?;
                Plan::InterferenceGrid { n }
            }
            ExperimentKind::VarianceScaling => {
                let p = Params::new(map, &with_model_keys(&["m_values", "trials"]))?;
                let m_values = p.usize_list("m_values", &default_m_values())?;
                check_m_values(&m_values)?;
                let trials = p.usize("trials", 4000)?;
                at_least("trials", trials, 1000)?;
                Plan::VarianceScaling {
                    model: model_from(&p, seed)?,
                    m_values,
                    trials,
                    seed,
                }
            }
            ExperimentKind::Spread => {
                let p = Params::new(map, &with_model_keys(&["n_particles", "steps", "ds", "velocity", "bins"]))?;
                let d = EnsembleConfig::default();
                let config = EnsembleConfig {
                    n_particles: p.usize("n_particles", d.n_particles)?,
                    steps: p.usize("steps", d.steps)?,
                    ds: p.f64("ds", d.ds)?,
                    initial_velocity: p.vec4("velocity", d.initial_velocity)?,
                    histogram_bins: p.usize("bins", d.histogram_bins)?,
                    ..d
                };
                at_least("n_particles", config.n_particles, 1000)?;
                at_least("steps", config.steps, 2)?;
                at_least("bins", config.histogram_bins, 1)?;
                if !(config.ds > 0.0) {
                    return Err(config_err(format!("ds must be > 0, got {}", config.ds)));
                }
                Plan::Spread {
                    model: model_from(&p, seed)?,
                    config,
                    seed,
                }
            }
            ExperimentKind::Uncertainty => {
                let p = Params::new(map, &with_model_keys(&["m_values", "trials", "p_cov", "component", "grain"]))?;
                let m_values = p.usize_list("m_values", &default_m_values())?;
                check_m_values(&m_values)?;
                let trials = p.usize("trials", 4000)?;
                at_least("trials", trials, 1000)?;
                let component = p.usize("component", 1)?;
                if !(1..=4).contains(&component) {
                    return Err(config_err(format!("component must be in 1..=4, got {component}")));
                }
                let grain = p.f64("grain", 1.0)?;
                if !(grain > 0.0) {
                    return Err(config_err(format!("grain must be > 0, got {grain}")));
                }
                Plan::Uncertainty {
                    model: model_from(&p, seed)?,
                    m_values,
                    p_cov: p.vec4("p_cov", [1.0, 0.0, 0.0, 1.0])?,
                    component: component - 1,
                    grain,
                    trials,
                    seed,
                }
            }
            ExperimentKind::Malus => {
                let p = Params::new(map, &["deltas", "n", "rule"])?;
                let deltas = p.f64_list("deltas", &DEFAULT_MALUS_DELTAS)?;
                let n = p.usize("n", 1_000_000)?;
                at_least("n", n, oscillator::MIN_EXPERIMENT_PHOTONS)?;
                let rule = match p.str("rule", "two-gate")? {
                    "two-gate" => PassRule::TwoGate,
                    "spatial-only" => PassRule::SpatialOnly,
                    other => return Err(config_err(format!("rule must be 'two-gate' or 'spatial-only', got '{other}'"))),
                };
                Plan::Malus { deltas, n, rule, seed }
            }
            ExperimentKind::Chain => {
                let p = Params::new(map, &["axes", "source", "source_angle", "n"])?;
                let axes = p.f64_list("axes", &[0.0, FRAC_PI_4, FRAC_PI_2])?;
                if axes.is_empty() {
                    return Err(config_err("axes must not be empty".into()));
                }
                let source = match p.str("source", "fixed")? {
                    "fixed" => SourceKind::Fixed(p.f64("source_angle", 0.0)?),
                    "unpolarized" => SourceKind::Unpolarized,
                    other => return Err(config_err(format!("source must be 'fixed' or 'unpolarized', got '{other}'"))),
                };
                let n = p.usize("n", 1_000_000)?;
                at_least("n", n, oscillator::MIN_EXPERIMENT_PHOTONS)?;
                Plan::Chain { axes, source, n, seed }
            }
            ExperimentKind::Chsh => {
                let p = Params::new(map, &["a", "a_prime", "b", "b_prime", "n", "lock", "rule"])?;
                let angles = [
                    p.f64("a", 0.0)?,
                    p.f64("a_prime", FRAC_PI_4)?,
                    p.f64("b", FRAC_PI_8)?,
                    p.f64("b_prime", 3.0 * FRAC_PI_8)?,
                ];
                let n = p.usize("n", 1_000_000)?;
                at_least("n", n, entangle::MIN_CHSH_PAIRS)?;
                let lock = match p.str("lock", "in-phase")? {
                    "in-phase" => LockMode::InPhase,
                    "pi-offset" => LockMode::PiOffset,
                    other => return Err(config_err(format!("lock must be 'in-phase' or 'pi-offset', got '{other}'"))),
                };
                let rule = match p.str("rule", "collapse")? {
                    "collapse" => CorrelationRule::Collapse,
                    "classical" => CorrelationRule::Classical,
                    other => return Err(config_err(format!("rule must be 'collapse' or 'classical', got '{other}'"))),
                };
                Plan::Chsh {
                    angles,
                    n,
                    lock,
                    rule,
                    seed,
                }
            }
            ExperimentKind::Twoslit => {
                let p = Params::new(
                    map,
                    &[
                        "slit_separation",
                        "screen_distance",
                        "x_min",
                        "x_max",
                        "bins",
                        "lambda",
                        "envelope_width",
                        "detector_a_on",
                        "n",
                    ],
                )?;
                let d = SlitGeometry::default();
                let geometry = SlitGeometry {
                    slit_separation: p.f64("slit_separation", d.slit_separation)?,
                    screen_distance: p.f64("screen_distance", d.screen_distance)?,
                    x_min: p.f64("x_min", d.x_min)?,
                    x_max: p.f64("x_max", d.x_max)?,
                    bins: p.usize("bins", d.bins)?,
                    lambda: p.f64("lambda", d.lambda)?,
                    envelope_width: p.f64("envelope_width", d.envelope_width)?,
                    detector_a_on: p.bool("detector_a_on", d.detector_a_on)?,
                };
                geometry.validate()?;
                let n = p.usize("n", 1_000_000)?;
                at_least("n", n, slit::MIN_PARTICLES)?;
                Plan::Twoslit { geometry, n, seed }
            }
            ExperimentKind::SchwarzschildDemo => {
                let p = Params::new(map, &["r_bar", "gm", "min_log2", "max_log2"])?;
                let d = Refinement::default();
                let refinement = Refinement {
                    min_log2: p.u64("min_log2", d.min_log2.into())? as u32,
                    max_log2: p.u64("max_log2", d.max_log2.into())? as u32,
                };
                if refinement.min_log2 < 2 || refinement.max_log2 > 28 || refinement.max_log2 < refinement.min_log2 + 2 {
                    return Err(config_err("need 2 <= min_log2 and min_log2 + 2 <= max_log2 <= 28".into()));
                }
                Plan::Schwarzschild {
                    r_bar: p.f64("r_bar", 10.0)?,
                    gm: p.f64("gm", 1.0)?,
                    refinement,
                }
            }
            ExperimentKind::MeasurementDemo => {
                let p = Params::new(map, &["v", "x_f", "x_b", "t0"])?;
                Plan::Measurement {
                    v: p.f64("v", 0.5)?,
                    x_f: p.f64("x_f", 1.0)?,
                    x_b: p.f64("x_b", 2.0)?,
                    t0: p.f64("t0", 0.0)?,
                }
            }
        };
        Ok(plan)
    }

    fn execute(&self, result: &mut ExperimentResult) -> Result<()> {
        match self {
            Plan::InterferenceGrid { n } => interference_grid(*n, result),
            Plan::VarianceScaling {
                model,
                m_values,
                trials,
                seed,
            } => {
                let r = field::variance_scaling_experiment(model, m_values, *trials, *seed)?;
                let mut t = Table::new("variance", &["m", "var"]);
                for (m, var) in &r.rows {
                    t.push(vec![m.to_string(), num(*var)]);
                }
                result.tables.push(t);
                result.metric("slope", r.fit.slope);
                result.metric("intercept", r.fit.intercept);
                result.metric("r_squared", r.fit.r_squared);
                result.metric("trials", *trials);
            }
            Plan::Spread { model, config, seed } => {
                let r = geodesic::free_particle_ensemble_with(model, config, *seed)?;
                let mut t = Table::new("spread", &["step", "variance"]);
                for (s, v) in r.variance.iter().enumerate() {
                    t.push(vec![s.to_string(), num(*v)]);
                }
                let mut h = Table::new("spread_histogram", &["bin_center", "count"]);
                for (i, c) in r.final_histogram.counts.iter().enumerate() {
                    h.push(vec![num(r.final_histogram.bin_center(i)), c.to_string()]);
                }
                result.tables.push(t);
                result.tables.push(h);
                result.metric("slope_per_step", r.fit.slope);
                result.metric("slope_per_ds", r.slope_per_ds);
                result.metric("r_squared", r.fit.r_squared);
                result.metric("excess_kurtosis", r.excess_kurtosis);
                result.metric("final_variance", *r.variance.last().expect("steps >= 1"));
                result.metric("n_particles", config.n_particles);
                result.metric("steps", config.steps);
            }
            Plan::Uncertainty {
                model,
                m_values,
                p_cov,
                component,
                grain,
                trials,
                seed,
            } => {
                let r = uncertainty::uncertainty_product_for_component(
                    model, *component, m_values, *p_cov, *trials, *grain, *seed,
                )?;
                let mut t = Table::new("uncertainty", &["m", "dq", "dp", "product", "dp_std", "product_std"]);
                for row in &r.rows {
                    t.push(vec![
                        row.m.to_string(),
                        num(row.dq),
                        num(row.dp),
                        num(row.product),
                        num(row.dp_std),
                        num(row.product_std),
                    ]);
                }
                result.tables.push(t);
                result.metric("product_ratio", r.product_ratio());
                result.metric("product_std_ratio", r.product_std_ratio());
                result.metric("trials", *trials);
            }
            Plan::Malus { deltas, n, rule, seed } => {
                let rows = oscillator::malus_experiment_with(deltas, *n, *seed, *rule)?;
                let mut t = Table::new("malus", &["delta_rad", "n", "passed", "fraction", "expected"]);
                for r in &rows {
                    t.push(vec![
                        num(r.delta),
                        r.n.to_string(),
                        r.passed.to_string(),
                        num(r.fraction),
                        num(r.expected),
                    ]);
                }
                result.tables.push(t);
                let max_z = rows.iter().map(|r| r.z_score()).fold(0.0, f64::max);
                result.metric("max_z_score", max_z);
                result.metric("n", *n);
            }
            Plan::Chain { axes, source, n, seed } => {
                let r = oscillator::polarizer_chain(axes, *source, *n, *seed)?;
                let mut t = Table::new("chain", &["stage", "axis_rad", "count", "fraction_of_source"]);
                for (i, (axis, count)) in axes.iter().zip(&r.stage_counts).enumerate() {
                    t.push(vec![
                        (i + 1).to_string(),
                        num(*axis),
                        count.to_string(),
                        num(*count as f64 / r.source_count as f64),
                    ]);
                }
                result.tables.push(t);
                result.metric("source_count", r.source_count);
                result.metric("first_stage_count", r.stage_counts[0]);
                result.metric("final_count", r.final_count());
                result.metric("fraction_of_source", r.fraction_of_source());
                result.metric("fraction_of_first", r.fraction_of_first());
            }
            Plan::Chsh {
                angles,
                n,
                lock,
                rule,
                seed,
            } => {
                let [a, a2, b, b2] = *angles;
                let r = entangle::chsh_experiment_with(a, a2, b, b2, *n, *seed, *lock, *rule)?;
                let mut t = Table::new("chsh", &["pair", "E"]);
                let labels = ["ab", "ab'", "a'b", "a'b'"];
                for (label, c) in labels.iter().zip(&r.correlations) {
                    t.push(vec![label.to_string(), num(c.value())]);
                }
                result.tables.push(t);
                let se = r
                    .correlations
                    .iter()
                    .map(|c| (1.0 - c.value().powi(2)).max(0.0) / c.n as f64)
                    .sum::<f64>()
                    .sqrt();
                result.metric("S", r.s);
                result.metric("S_standard_error", se);
                result.metric("n", *n);
            }
            Plan::Twoslit { geometry, n, seed } => {
                let r = slit::two_slit_experiment(geometry, *n, *seed)?;
                let mut t = Table::new("twoslit", &["bin_center", "count", "expected"]);
                for ((x, c), e) in r.bin_centers.iter().zip(&r.counts).zip(&r.expected) {
                    t.push(vec![num(*x), c.to_string(), num(*e)]);
                }
                result.tables.push(t);
                result.metric("chi_square", r.chi_square.statistic);
                result.metric("dof", r.chi_square.dof);
                result.metric("p_value", r.chi_square.p_value);
                result.metric("visibility", r.visibility);
                result.metric("slit_a", r.slit_counts[0]);
                result.metric("slit_b", r.slit_counts[1]);
                result.metric("detector_on", r.detector_on);
                result.metric("n", *n);
            }
            Plan::Schwarzschild { r_bar, gm, refinement } => {
                let d = measurement::schwarzschild_distances_with(*r_bar, *gm, *refinement)?;
                result.metric("r_bar", *r_bar);
                result.metric("contravariant", d.contravariant);
                let mut t = Table::new("schwarzschild", &["cells", "step", "last_node", "partial_sum"]);
                match d.covariant {
                    CovariantDistance::Finite(x) => {
                        result.metric("covariant", x);
                        result.metric("divergent", false);
                    }
                    CovariantDistance::Divergent(report) => {
                        for l in &report.levels {
                            t.push(vec![l.cells.to_string(), num(l.step), num(l.last_node), num(l.partial_sum)]);
                        }
                        result.metric("covariant", "divergent");
                        result.metric("divergent", report.is_divergent());
                        result.metric("singularity_at", report.singularity_at);
                        result.metric("max_partial_sum", report.max_partial_sum());
                        result.metric("growth_exponent", report.growth_exponent());
                    }
                }
                result.tables.push(t);
            }
            Plan::Measurement { v, x_f, x_b, t0 } => {
                let r = measurement::idealized_measurement(*v, *x_f, *x_b, *t0)?;
                let mut t = Table::new("measurement", &["quantity", "value"]);
                let rows = [
                    ("t1", r.t1),
                    ("t2", r.t2),
                    ("elapsed", r.elapsed),
                    ("x1_contravariant", r.contravariant[0]),
                    ("x2_contravariant", r.contravariant[1]),
                    ("x1_covariant", r.covariant[0]),
                    ("x2_covariant", r.covariant[1]),
                    ("residual", r.residual),
                ];
                for (k, v) in rows {
                    t.push(vec![k.to_string(), num(v)]);
                    result.metric(k, v);
                }
                result.tables.push(t);
                result.metric("consistent", r.consistent());
            }
        }
        Ok(())
    }
}

fn interference_grid(n: usize, result: &mut ExperimentResult) {
    let mut t = Table::new("interference_grid", &["alpha", "beta", "density", "closed_form", "abs_err"]);
    let mut max_err: f64 = 0.0;
    for i in 0..n {
        let alpha = TAU * i as f64 / n as f64;
        for j in 0..n {
            let beta = TAU * j as f64 / n as f64;
            let density = interference_density(alpha, beta);
            let closed = ((alpha - beta) / 2.0).cos().abs();
            let err = (density - closed).abs();
            max_err = max_err.max(err);
            t.push(vec![num(alpha), num(beta), num(density), num(closed), num(err)]);
        }
    }
    result.tables.push(t);
    result.metric("points", n * n);
    result.metric("max_abs_err", json!(max_err));
}

/// Validates and computes without touching the file system.
pub fn compute_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let plan = Plan::from_spec(spec)?;
    let mut result = ExperimentResult::new(spec);
    plan.execute(&mut result)?;
    Ok(result)
}

/// Validates, computes, and writes `summary.json` plus the tables into
/// `spec.output_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let result = compute_experiment(spec)?;
    result.write(&spec.output_dir)?;
    Ok(result)
}

/// Checks a spec without running it.
pub fn validate_spec(spec: &ExperimentSpec) -> Result<()> {
    Plan::from_spec(spec).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: ExperimentKind) -> ExperimentSpec {
        ExperimentSpec::new(kind, Some(1), "unused")
    }

    #[test]
    fn stochastic_experiments_need_a_seed() {
        for kind in ExperimentKind::ALL {
            let s = ExperimentSpec::new(kind, None, "unused");
            assert_eq!(validate_spec(&s).is_err(), kind.is_stochastic(), "{kind}");
        }
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        let cases = [
            spec(ExperimentKind::Malus).with_param("n", 10),
            spec(ExperimentKind::Malus).with_param("rule", "three-gate"),
            spec(ExperimentKind::Chsh).with_param("lock", "sideways"),
            spec(ExperimentKind::VarianceScaling).with_param("trials", 10),
            spec(ExperimentKind::VarianceScaling).with_param("m_values", json!([0, 4])),
            spec(ExperimentKind::VarianceScaling)
                .with_param("mode", "crypto")
                .with_param("frequency_hz", 1e10),
            spec(ExperimentKind::Spread).with_param("sigma", -1.0),
            spec(ExperimentKind::Uncertainty).with_param("component", 5),
            spec(ExperimentKind::Twoslit).with_param("bins", 8),
            spec(ExperimentKind::Chain).with_param("axes", json!([])),
            spec(ExperimentKind::SchwarzschildDemo).with_param("max_log2", 40),
            spec(ExperimentKind::InterferenceGrid).with_param("size", 3),
        ];
        for s in cases {
            let e = validate_spec(&s).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{:?}: {e}", s.params);
        }
    }

    #[test]
    fn geometry_errors_surface_at_run_time_as_config_errors() {
        let s = spec(ExperimentKind::MeasurementDemo).with_param("v", 1.5);
        assert_eq!(compute_experiment(&s).unwrap_err().exit_code(), 1);
        let s = spec(ExperimentKind::SchwarzschildDemo).with_param("r_bar", 1.0);
        assert_eq!(compute_experiment(&s).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn interference_grid_meets_tolerance() {
        let r = compute_experiment(&spec(ExperimentKind::InterferenceGrid).with_param("n", 20)).unwrap();
        assert!(r.summary["max_abs_err"].as_f64().unwrap() < 1e-12);
        assert_eq!(r.table("interference_grid").unwrap().rows.len(), 400);
    }

    #[test]
    fn demos_report_their_contract() {
        let r = compute_experiment(&spec(ExperimentKind::SchwarzschildDemo)).unwrap();
        assert_eq!(r.summary["contravariant"], json!(10.0));
        assert_eq!(r.summary["divergent"], json!(true));
        let r = compute_experiment(&spec(ExperimentKind::MeasurementDemo)).unwrap();
        assert_eq!(r.summary["consistent"], json!(true));
    }
}
