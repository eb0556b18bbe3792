//! Config-driven experiment runner for the `twopoint-core` solver.
//!
//! An experiment is a TOML document (see [`config::ExperimentConfig`]) or one
//! of the built-in presets. Each subcommand writes its results to an output
//! directory: time series and nodal snapshots as CSV (or JSON), plus a
//! `summary.json` holding the config, its hash, derived constants and the
//! exit status.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, run_command, Command, ConfigSource, Invocation};
pub use config::{parse_config, preset, ExperimentConfig, Format, LoadedConfig};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 2;
    pub const PICARD_FAILURE: i32 = 3;
    pub const UNEXPECTED_BLOWUP: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => exit::VALIDATION,
            CliError::Io(_) => exit::IO,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
