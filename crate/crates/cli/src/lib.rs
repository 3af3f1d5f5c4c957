//! Command-line frontend for the `chemotax` solver: configuration, CSV diagnostics,
//! binary snapshots, parameter sweeps and plot data.

pub mod commands;
pub mod config;
pub mod output;
pub mod snapshot;
pub mod sweep;

pub use config::{ConfigError, RunConfig};
pub use snapshot::{Snapshot, SnapshotHeader};

use chemotax::RunStatus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_MISSING_COLUMN: i32 = 65;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] chemotax::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::MissingColumn(_) => EXIT_MISSING_COLUMN,
            _ => EXIT_FAILURE,
        }
    }
}

pub fn status_exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::BlowupIndicated => EXIT_BLOWUP,
        RunStatus::SolverFailure => EXIT_FAILURE,
    }
}
