//! Orchestration behind the `stfm` binary: ingest, rank selection, fit,
//! forecast, backtest, simulate and report, all driven by one [`RunConfig`].

pub mod commands;
pub mod config;

pub use commands::{run, run_backtest, Command, Overrides};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config, or a missing input file.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl From<stfm_core::Error> for CliError {
    fn from(e: stfm_core::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}
