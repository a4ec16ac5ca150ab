//! Library side of the `superphonon` command: configuration, solver
//! dispatch, presets, sweeps, comparisons and file output.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

pub use commands::{compare, execute, run_document, sweep, CompareReport, Deviation, RunOutcome, SweepPoint};
pub use config::{parse_config, parse_override, Cutoff, RunConfig, Solver, SweepParam};

use superphonon_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParams(_)
            | CoreError::InvalidArgument(_)
            | CoreError::SchemeMismatch { .. }
            | CoreError::DimensionCap { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
