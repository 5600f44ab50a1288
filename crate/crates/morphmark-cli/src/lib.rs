//! Library half of the experiment runner: config schema, pipeline stages,
//! and the error-to-exit-code mapping. The `morphmark` binary is a thin
//! clap wrapper over this.

use std::fmt;

pub mod config;
pub mod runner;

#[derive(Debug)]
pub enum CliError {
    /// Bad config or flag combination; exit 2.
    Config(String),
    /// Filesystem trouble or malformed data files; exit 3.
    Io(String),
    /// Remote paraphrase endpoint failed after retries; exit 4.
    AttackUnavailable(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::AttackUnavailable(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::AttackUnavailable(msg) => write!(f, "attack unavailable: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
