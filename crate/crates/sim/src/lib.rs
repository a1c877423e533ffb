//! Experiment harness for the `destress-core` optimizers: JSON configs,
//! CSV data and trace files, comparison suites and mixing diagnostics.

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod trace;

pub use config::ExperimentConfig;
pub use destress_core;
pub use error::{Result, SimError};
pub use harness::{check_mixing, compare_suite, gradcheck, run_experiment, Setup};
pub use trace::{RunTrace, TraceRow};

/// Environment variable capping internal parallelism.
pub const THREADS_ENV: &str = "DESTRESS_SIM_THREADS";

/// The thread cap from [`THREADS_ENV`]; 1 when unset. Runs are sequential
/// at any setting, so traces never depend on it.
pub fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(SimError::ConfigInvalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}
