//! Library side of the `vacqnet` binary: config ingestion, the four run modes
//! and their CSV output.
//!
//! Every `run_*` function returns the CSV document as a string so callers
//! decide where it goes; nothing is written when a run fails.

mod commands;
mod run_config;

pub use commands::{
    analyze_csv, run_analyze, run_frontier, run_simulate, run_simulate_with_events, run_sweep,
    ANALYZE_HEADER, FRONTIER_HEADER, SIMULATE_HEADER,
};
pub use run_config::{
    set_parameter, AxisSpec, FrontierSpec, Mode, RunConfig, Scale, SearchSpec, DEFAULT_BISECTION_STEPS,
    DEFAULT_SEED,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Solver(vacqnet_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<vacqnet_core::Error> for CliError {
    fn from(e: vacqnet_core::Error) -> Self {
        use vacqnet_core::Error as E;
        match e {
            E::InvalidConfig(msg) | E::UnsupportedStrategy(msg) | E::DimensionMismatch(msg) => {
                CliError::Config(msg)
            }
            E::StateSpaceTooLarge { states, cap } => {
                CliError::Config(format!("{states} states exceed the cap of {cap}"))
            }
            other => CliError::Solver(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::NotConverged(_) | CliError::Solver(_) => EXIT_NOT_CONVERGED,
            CliError::Io(_) => EXIT_IO,
        }
    }
}
