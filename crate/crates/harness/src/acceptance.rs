//! The acceptance suite: eleven analytically anchored checks, each run with a
//! fixed seed and tolerance, reported as one table row.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cml_core::metric::{det4, PhaseMetric, WTransform};
use cml_core::{rng, Scalar};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};
use crate::experiments::{default_m_values, run_experiment};
use crate::output::{num, Table};
use crate::spec::{ExperimentKind, ExperimentSpec};

/// Bounds each criterion is judged against. Exposed so that tests can break
/// one on purpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub interference_abs: f64,
    pub rotoreflection_abs: f64,
    pub variance_slope: f64,
    pub spread_r_squared: f64,
    pub spread_kurtosis: f64,
    pub uncertainty_ratio: f64,
    pub malus_standard_errors: f64,
    pub chain_quarter: f64,
    pub chsh_target: f64,
    pub chsh_abs: f64,
    pub chsh_classical_max: f64,
    pub twoslit_p_min: f64,
    pub twoslit_visibility_max: f64,
    pub schwarzschild_partial_sum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            interference_abs: 1e-12,
            rotoreflection_abs: 1e-12,
            variance_slope: 0.05,
            spread_r_squared: 0.99,
            spread_kurtosis: 0.1,
            uncertainty_ratio: 1.3,
            malus_standard_errors: 4.0,
            chain_quarter: 0.002,
            chsh_target: 2.828,
            chsh_abs: 0.02,
            chsh_classical_max: 2.02,
            twoslit_p_min: 0.001,
            twoslit_visibility_max: 0.05,
            schwarzschild_partial_sum: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionRow {
    pub id: u32,
    pub name: &'static str,
    pub measured: String,
    pub bound: String,
    pub pass: bool,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionRow {
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }

    /// One-line human summary.
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<16} measured {} | bound {} | {:.2}s (budget {}s)",
            self.verdict(),
            self.id,
            self.name,
            self.measured,
            self.bound,
            self.seconds,
            self.budget_seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceReport {
    pub rows: Vec<CriterionRow>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            3
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut t = Table::new("acceptance", &["id", "name", "measured", "bound", "verdict", "seconds"]);
        for r in &self.rows {
            t.push(vec![
                r.id.to_string(),
                r.name.to_string(),
                r.measured.clone(),
                r.bound.clone(),
                r.verdict().to_string(),
                format!("{:.3}", r.seconds),
            ]);
        }
        let csv = dir.join(t.file_name());
        fs::write(&csv, t.to_csv()?).map_err(|e| HarnessError::io(&csv, e))?;
        let json_path = dir.join("acceptance.json");
        let doc = json!({ "all_passed": self.all_passed(), "criteria": self.rows });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| HarnessError::Config(e.to_string()))? + "\n";
        fs::write(&json_path, text).map_err(|e| HarnessError::io(&json_path, e))
    }
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget_seconds: f64,
}

pub const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "interference", budget_seconds: 1.0 },
    Criterion { id: 2, name: "rotoreflection", budget_seconds: 1.0 },
    Criterion { id: 3, name: "variance-scaling", budget_seconds: 30.0 },
    Criterion { id: 4, name: "spread", budget_seconds: 120.0 },
    Criterion { id: 5, name: "uncertainty", budget_seconds: 60.0 },
    Criterion { id: 6, name: "malus", budget_seconds: 30.0 },
    Criterion { id: 7, name: "polarizer-chain", budget_seconds: 30.0 },
    Criterion { id: 8, name: "chsh", budget_seconds: 120.0 },
    Criterion { id: 9, name: "two-slit", budget_seconds: 60.0 },
    Criterion { id: 10, name: "determinism", budget_seconds: 300.0 },
    Criterion { id: 11, name: "schwarzschild", budget_seconds: 5.0 },
];

/// Measured value, bound, verdict.
type Check = (String, String, bool);

fn metric(summary: &std::collections::BTreeMap<String, Value>, key: &str) -> f64 {
    summary.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn spec(kind: ExperimentKind, id: u32, dir: &Path, sub: &str) -> ExperimentSpec {
    ExperimentSpec::new(kind, Some(u64::from(id)), dir.join(format!("c{id:02}-{sub}")))
}

fn malus_spec(dir: &Path) -> ExperimentSpec {
    spec(ExperimentKind::Malus, 6, dir, "malus")
}

fn chsh_spec(dir: &Path) -> ExperimentSpec {
    spec(ExperimentKind::Chsh, 8, dir, "chsh")
}

fn check(id: u32, tol: &Tolerances, dir: &Path) -> Result<Check> {
    Ok(match id {
        1 => {
            let r = run_experiment(&spec(ExperimentKind::InterferenceGrid, id, dir, "grid").with_param("n", 100))?;
            let err = metric(&r.summary, "max_abs_err");
            (format!("max |err| = {err:e}"), format!("< {:e}", tol.interference_abs), err < tol.interference_abs)
        }
        2 => rotoreflection_check(tol, dir)?,
        3 => {
            let r = run_experiment(&spec(ExperimentKind::VarianceScaling, id, dir, "variance").with_param("trials", 4000))?;
            let slope = metric(&r.summary, "slope");
            (
                format!("slope = {slope:.4}"),
                format!("-1.00 ± {}", tol.variance_slope),
                (slope + 1.0).abs() <= tol.variance_slope,
            )
        }
        4 => {
            let r = run_experiment(
                &spec(ExperimentKind::Spread, id, dir, "spread")
                    .with_param("n_particles", 10_000)
                    .with_param("steps", 200),
            )?;
            let r2 = metric(&r.summary, "r_squared");
            let k = metric(&r.summary, "excess_kurtosis");
            (
                format!("R² = {r2:.5}, kurtosis = {k:.4}"),
                format!("R² > {}, |kurtosis| < {}", tol.spread_r_squared, tol.spread_kurtosis),
                r2 > tol.spread_r_squared && k.abs() < tol.spread_kurtosis,
            )
        }
        5 => {
            let r = run_experiment(
                &spec(ExperimentKind::Uncertainty, id, dir, "uncertainty")
                    .with_param("m_values", json!(default_m_values()))
                    .with_param("trials", 4000),
            )?;
            let ratio = metric(&r.summary, "product_ratio");
            (format!("max/min = {ratio:.4}"), format!("< {}", tol.uncertainty_ratio), ratio < tol.uncertainty_ratio)
        }
        6 => {
            let r = run_experiment(&malus_spec(dir))?;
            let z = metric(&r.summary, "max_z_score");
            (
                format!("max deviation = {z:.3} SE"),
                format!("< {} SE", tol.malus_standard_errors),
                z < tol.malus_standard_errors,
            )
        }
        7 => {
            let crossed = run_experiment(
                &spec(ExperimentKind::Chain, id, dir, "crossed").with_param("axes", json!([0.0, FRAC_PI_2])),
            )?;
            let middle = run_experiment(
                &spec(ExperimentKind::Chain, id, dir, "middle").with_param("axes", json!([0.0, FRAC_PI_4, FRAC_PI_2])),
            )?;
            let blocked = metric(&crossed.summary, "final_count");
            let quarter = metric(&middle.summary, "fraction_of_first");
            (
                format!("crossed = {blocked}, with 45° middle = {quarter:.5}"),
                format!("crossed = 0, middle 0.250 ± {}", tol.chain_quarter),
                blocked == 0.0 && (quarter - 0.25).abs() <= tol.chain_quarter,
            )
        }
        8 => {
            let q = run_experiment(&chsh_spec(dir))?;
            let c = run_experiment(&spec(ExperimentKind::Chsh, id, dir, "classical").with_param("rule", "classical"))?;
            let s = metric(&q.summary, "S");
            let sc = metric(&c.summary, "S");
            (
                format!("S = {s:.4}, classical S = {sc:.4}"),
                format!("S = {} ± {}, classical <= {}", tol.chsh_target, tol.chsh_abs, tol.chsh_classical_max),
                (s - tol.chsh_target).abs() <= tol.chsh_abs && sc <= tol.chsh_classical_max,
            )
        }
        9 => {
            let off = run_experiment(&spec(ExperimentKind::Twoslit, id, dir, "fringes"))?;
            let on = run_experiment(&spec(ExperimentKind::Twoslit, id, dir, "detector").with_param("detector_a_on", true))?;
            let p = metric(&off.summary, "p_value");
            let v = metric(&on.summary, "visibility");
            (
                format!("p = {p:.4}, detector-on visibility = {v:.4}"),
                format!("p > {}, visibility < {}", tol.twoslit_p_min, tol.twoslit_visibility_max),
                p > tol.twoslit_p_min && v < tol.twoslit_visibility_max,
            )
        }
        10 => determinism_check(dir)?,
        11 => {
            let r = run_experiment(&spec(ExperimentKind::SchwarzschildDemo, id, dir, "schwarzschild"))?;
            let contra = metric(&r.summary, "contravariant");
            let r_bar = metric(&r.summary, "r_bar");
            let divergent = r.summary.get("divergent") == Some(&json!(true));
            let max_sum = metric(&r.summary, "max_partial_sum");
            (
                format!("contravariant = {contra} (r̄ = {r_bar}), divergent = {divergent}, max partial sum = {max_sum:e}"),
                format!("contravariant = r̄, divergent, partial sum > {:e}", tol.schwarzschild_partial_sum),
                contra == r_bar && divergent && max_sum > tol.schwarzschild_partial_sum,
            )
        }
        _ => return Err(HarnessError::Config(format!("no acceptance criterion {id}"))),
    })
}

fn rotoreflection_check(tol: &Tolerances, dir: &Path) -> Result<Check> {
    let mut t = Table::new("rotoreflection", &["alpha", "imag_residue", "block_err", "det"]);
    let mut worst: f64 = 0.0;
    let mut dets_ok = true;
    for i in 0..1000u64 {
        let alpha = TAU * rng::unit_at(2, &[i]);
        let transformed = WTransform.apply(&PhaseMetric::new(alpha).expand());
        let residue = transformed.imaginary_residue();
        let real: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| transformed.get(r, c).re));
        let (c, s) = (alpha.cos(), alpha.sin());
        let expect = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, -c, s],
            [0.0, 0.0, s, c],
        ];
        let block_err = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| (real[r][c] - expect[r][c]).abs())
            .fold(0.0, f64::max);
        let det = det4(&real);
        dets_ok &= (det + 1.0).abs() <= f64::exact_tol();
        worst = worst.max(residue).max(block_err);
        t.push(vec![num(alpha), num(residue), num(block_err), num(det)]);
    }
    let out = dir.join("c02-rotoreflection");
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    let path = out.join(t.file_name());
    fs::write(&path, t.to_csv()?).map_err(|e| HarnessError::io(&path, e))?;
    Ok((
        format!("max deviation = {worst:e}, det = -1 for all: {dets_ok}"),
        format!("< {:e}, det = -1", tol.rotoreflection_abs),
        worst < tol.rotoreflection_abs && dets_ok,
    ))
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Sorted `(file name, bytes)` of every file in `dir`.
pub fn directory_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        let bytes = fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        files.push((path.file_name().unwrap_or_default().to_string_lossy().into_owned(), bytes));
    }
    files.sort();
    Ok(files)
}

fn determinism_check(dir: &Path) -> Result<Check> {
    let mut compared = 0;
    let mut identical = 0;
    for base in [malus_spec(dir), chsh_spec(dir)] {
        let mut outputs = Vec::new();
        for threads in [1, 3, 8] {
            let mut s = base.clone();
            s.output_dir = dir.join(format!("c10-{}-threads{threads}", base.experiment));
            with_threads(threads, || run_experiment(&s))??;
            outputs.push(directory_bytes(&s.output_dir)?);
        }
        for other in &outputs[1..] {
            compared += 1;
            if *other == outputs[0] {
                identical += 1;
            }
        }
    }
    Ok((
        format!("{identical}/{compared} reruns byte-identical"),
        "all reruns byte-identical (1, 3, 8 threads)".into(),
        identical == compared,
    ))
}

/// Runs one criterion. Experiment errors are recorded as a failing row.
pub fn run_criterion(id: u32, tol: &Tolerances, output_dir: &Path) -> Result<CriterionRow> {
    let c = CRITERIA
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| HarnessError::Config(format!("no acceptance criterion {id}")))?;
    let start = Instant::now();
    let (measured, bound, pass) = match check(id, tol, output_dir) {
        Ok(v) => v,
        Err(e) => (format!("error: {e}"), "runs without error".into(), false),
    };
    Ok(CriterionRow {
        id,
        name: c.name,
        measured,
        bound,
        pass,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds: c.budget_seconds,
    })
}

pub fn run_acceptance_suite(output_dir: impl Into<PathBuf>) -> Result<AcceptanceReport> {
    let ids: Vec<u32> = CRITERIA.iter().map(|c| c.id).collect();
    run_acceptance_with(output_dir, &Tolerances::default(), &ids)
}

/// Runs the selected criteria, writes `acceptance.csv` and
/// `acceptance.json`, and returns the report.
pub fn run_acceptance_with(output_dir: impl Into<PathBuf>, tol: &Tolerances, ids: &[u32]) -> Result<AcceptanceReport> {
    let dir = output_dir.into();
    let rows = ids
        .iter()
        .map(|&id| run_criterion(id, tol, &dir))
        .collect::<Result<Vec<_>>>()?;
    let report = AcceptanceReport { rows };
    report.write(&dir)?;
    Ok(report)
}
