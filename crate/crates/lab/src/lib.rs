//! Experiment harness around `sqg-core`: TOML configs, reproducible runs and
//! sweeps, CSV/JSON/snapshot persistence, gnuplot scripts and the built-in
//! invariant checks.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod datum;
pub mod plots;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{load_config, DatumSpec, ExperimentConfig, ModeSpec, OutputConfig, ProbeConfig};
pub use plots::emit_plots;
pub use run::{run_experiment, RunOutput, RunReport, RunTermination};
pub use sweep::{sweep, SweepAxis, SweepOptions, SweepReport};
pub use verify::{verify, CheckName, CheckResult, VerifyOptions, VerifyReport};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("override error: {0}")]
    Override(String),
    #[error(transparent)]
    Solver(#[from] sqg_core::solver::SolverError),
    #[error(transparent)]
    Spectral(#[from] sqg_core::SpectralError),
    #[error(transparent)]
    Diagnostics(#[from] sqg_core::diagnostics::DiagnosticsError),
    #[error(transparent)]
    Bounds(#[from] sqg_core::bounds::BoundsError),
    #[error(transparent)]
    Snapshot(#[from] sqg_core::snapshot::SnapshotError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("nothing to plot")]
    NothingToPlot,
    #[error("{path}: missing columns {columns:?}")]
    MissingColumns { path: PathBuf, columns: Vec<String> },
    #[error("sweep: {0}")]
    Sweep(String),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> LabError {
    let path = path.into();
    move |source| LabError::Io { path, source }
}
