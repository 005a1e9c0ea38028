//! Configuration-driven experiments: parse a TOML config, run the solver
//! and every configured check, and persist a deterministic report with
//! tidy CSV plot data.

mod catalog;
mod config;
mod plotdata;
mod report;
mod runner;

use std::path::PathBuf;

pub use catalog::{bundled, catalog, CatalogEntry};
pub use config::{
    CheckSpec, ExperimentConfig, FlowConfig, HarnackSpec, ManifoldSpec, PdeSpec, ResidualKind, ResidualThresholds,
    TimeSpec, CONFIG_VERSION,
};
pub use plotdata::{emit_plotdata, PLOT_FILES};
pub use report::{
    HarnackRow, LiyauRow, RefinementRow, ResidualRow, RunReport, Series, Status, Timing, Verdict, REPORT_FILE,
    TIMING_FILE,
};
pub use runner::{run_experiment, write_run, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] crate::error::Error),

    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("unknown bundled experiment {0:?}")]
    UnknownExperiment(String),
}

impl ExperimentError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        ExperimentError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
