//! Driver for the `zhk` binary: configuration, subcommands and output files.

pub mod commands;
pub mod config;

use std::fmt;

use zhk_core::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// An invariant check or a numerical solve failed (exit 1).
    Failure(String),
    /// Model parameters violate a condition, e.g. the sign condition (exit 2).
    Model(String),
    /// Unreadable or unwritable files (exit 3).
    Io(String),
    /// Malformed configuration (exit 2).
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Model(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failure(m) => write!(f, "failure: {m}"),
            CliError::Model(m) => write!(f, "model condition violated: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoSolution { chi_minus_b, g_minus_one } => CliError::Model(format!(
                "no bifurcating solution: sign(chi - b) must equal sign(g - 1), got chi - b = {chi_minus_b}, g - 1 = {g_minus_one}"
            )),
            Error::InvalidParameter(m) => CliError::Model(m),
            Error::Io(e) => CliError::Io(e.to_string()),
            Error::Json(e) => CliError::Io(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
