//! Experiment harness around `realm-core`: a flat key/value config with CLI
//! overrides, the pretrain/adapt/sweep/check subcommands, and the CSV/JSON
//! output formats.

pub mod commands;
pub mod config;
pub mod io;
pub mod pipeline;

/// Failure modes mapped onto process exit codes: config errors exit 2,
/// runtime errors and check failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<realm_core::Error> for CliError {
    fn from(e: realm_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
