//! Experiment harness over `lnslab-core`: configuration, the stability and
//! counterexample scenarios, threshold calibration and the verify suite.

pub mod calibrate;
pub mod config;
pub mod demo;
pub mod scenarios;
pub mod setup;
pub mod verify;

use std::fs;
use std::path::Path;

use lnslab_core::dss::DssError;
use lnslab_core::fixedpoint::FixedPointError;
use lnslab_core::landau::LandauError;
use lnslab_core::lorentz::LorentzError;
use lnslab_core::mild_solver::SolverError;
use lnslab_core::snapshot::SnapshotError;
use lnslab_core::spectral::SpectralError;
use lnslab_core::GridError;
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    /// A scenario precondition failed; the message carries the measured
    /// values against their thresholds.
    #[error("refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Landau(#[from] LandauError),
    #[error(transparent)]
    Dss(#[from] DssError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    FixedPoint(#[from] FixedPointError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv output error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<config::ConfigError> for RunError {
    fn from(e: config::ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl RunError {
    /// 2 for configuration problems and refusals, 1 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Solver(_) | RunError::Io(_) | RunError::Csv(_) | RunError::FixedPoint(_) => 1,
            _ => 2,
        }
    }
}

/// Writes `value` as pretty JSON to `dir/name`, creating `dir`.
pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

/// Creates `dir/name` for writing, creating `dir`.
pub fn create(dir: &Path, name: &str) -> Result<fs::File, RunError> {
    fs::create_dir_all(dir)?;
    Ok(fs::File::create(dir.join(name))?)
}
