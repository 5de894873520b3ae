//! Experiment orchestration for `cml-core`: JSON specs in, CSV tables and a
//! JSON summary out, plus the acceptance suite.
//!
//! Exit codes used by the `cml` binary: 0 success, 1 config error, 2 numeric
//! failure, 3 acceptance failure.

pub mod acceptance;
pub mod error;
pub mod experiments;
pub mod output;
pub mod spec;

pub use acceptance::{run_acceptance_suite, AcceptanceReport, Tolerances};
pub use error::{HarnessError, Result};
pub use experiments::{compute_experiment, run_experiment, validate_spec};
pub use output::{ExperimentResult, Table};
pub use spec::{ExperimentKind, ExperimentSpec};

/// Applies `CML_THREADS` to the global rayon pool. Unset or empty leaves the
/// default; anything but a positive integer is a config error.
pub fn configure_threads_from_env() -> Result<()> {
    let Ok(value) = std::env::var("CML_THREADS") else {
        return Ok(());
    };
    if value.trim().is_empty() {
        return Ok(());
    }
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| HarnessError::Config(format!("CML_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot configure thread pool: {e}")))
}
