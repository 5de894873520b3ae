use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cml_harness::acceptance::{run_acceptance_with, CRITERIA};
use cml_harness::{run_experiment, ExperimentKind, ExperimentSpec, HarnessError, Result, Tolerances};
use serde_json::Value;

/// Deterministic experiments on a fluctuating metric-tensor model.
#[derive(Parser)]
#[command(name = "cml", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Determinant of superposed phase metrics over an (α, β) grid.
    InterferenceGrid(RunArgs),
    /// Variance of the volume-averaged metric against region size.
    VarianceScaling(RunArgs),
    /// Free-particle spreading under the fluctuating metric.
    Spread(RunArgs),
    /// Uncertainty product Δq¹·Δp¹ against region size.
    Uncertainty(RunArgs),
    /// Polarizer transmission against angle.
    Malus(RunArgs),
    /// Photons through a chain of polarizers.
    Chain(RunArgs),
    /// CHSH correlations of phase-locked pairs.
    Chsh(RunArgs),
    /// Two-slit hit histogram.
    Twoslit(RunArgs),
    /// Contravariant and covariant radial distance near a mass.
    SchwarzschildDemo(RunArgs),
    /// Photon-timing measurement on a Minkowski diagram.
    MeasurementDemo(RunArgs),
    /// Runs whatever experiment the config file names.
    Run(RunArgs),
    /// Runs the acceptance suite.
    Accept(AcceptArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON spec: {"experiment", "seed", "params", "output_dir"}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for all random streams. Required for stochastic experiments.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Parameter override `key=value`; the value is read as JSON, falling
    /// back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct AcceptArgs {
    #[arg(long, default_value = "runs/acceptance")]
    output_dir: PathBuf,
    /// Criterion ids to run (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// JSON file overriding individual tolerances.
    #[arg(long, hide = true)]
    tolerances: Option<PathBuf>,
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))
}

fn build_spec(kind: Option<ExperimentKind>, args: RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let spec = ExperimentSpec::from_json(&read(path)?)?;
            if let Some(kind) = kind {
                if spec.experiment != kind {
                    return Err(HarnessError::Config(format!(
                        "config is for '{}' but the subcommand is '{kind}'",
                        spec.experiment
                    )));
                }
            }
            spec
        }
        None => {
            let kind = kind.ok_or_else(|| HarnessError::Config("`run` needs --config".into()))?;
            ExperimentSpec::new(kind, None, PathBuf::from("runs").join(kind.name()))
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = Some(seed);
    }
    if let Some(dir) = args.output_dir {
        spec.output_dir = dir;
    }
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("--set expects KEY=VALUE, got '{item}'")))?;
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        spec.params.insert(key.to_string(), value);
    }
    Ok(spec)
}

fn run(command: Command) -> Result<i32> {
    cml_harness::configure_threads_from_env()?;
    let (kind, args) = match command {
        Command::Accept(args) => {
            let tol = match &args.tolerances {
                Some(path) => serde_json::from_str(&read(path)?)
                    .map_err(|e| HarnessError::Config(format!("invalid tolerances: {e}")))?,
                None => Tolerances::default(),
            };
            let ids: Vec<u32> = if args.only.is_empty() {
                CRITERIA.iter().map(|c| c.id).collect()
            } else {
                args.only
            };
            let report = run_acceptance_with(&args.output_dir, &tol, &ids)?;
            for row in &report.rows {
                println!("{}", row.line());
            }
            println!(
                "{} of {} criteria passed; table in {}",
                report.rows.iter().filter(|r| r.pass).count(),
                report.rows.len(),
                args.output_dir.join("acceptance.csv").display()
            );
            return Ok(report.exit_code());
        }
        Command::Run(args) => (None, args),
        Command::InterferenceGrid(a) => (Some(ExperimentKind::InterferenceGrid), a),
        Command::VarianceScaling(a) => (Some(ExperimentKind::VarianceScaling), a),
        Command::Spread(a) => (Some(ExperimentKind::Spread), a),
        Command::Uncertainty(a) => (Some(ExperimentKind::Uncertainty), a),
        Command::Malus(a) => (Some(ExperimentKind::Malus), a),
        Command::Chain(a) => (Some(ExperimentKind::Chain), a),
        Command::Chsh(a) => (Some(ExperimentKind::Chsh), a),
        Command::Twoslit(a) => (Some(ExperimentKind::Twoslit), a),
        Command::SchwarzschildDemo(a) => (Some(ExperimentKind::SchwarzschildDemo), a),
        Command::MeasurementDemo(a) => (Some(ExperimentKind::MeasurementDemo), a),
    };
    let spec = build_spec(kind, args)?;
    let result = run_experiment(&spec)?;
    for (key, value) in &result.summary {
        println!("{key} = {value}");
    }
    println!("wrote {}", spec.output_dir.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap's own usage errors would exit 2, which is reserved here
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
