use thiserror::Error;

/// Errors raised by the analytical pipeline and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("constructed matrix violates stochasticity: {0}")]
    NotStochastic(String),

    #[error("singular linear system ({0})")]
    Singular(String),

    #[error("rate-matrix iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RateMatrixDiverged { iterations: usize, residual: f64 },

    #[error("quadrature did not reach the requested accuracy (error estimate {0:e})")]
    Quadrature(f64),

    #[error("joint state space has {states} states, above the cap of {cap}")]
    StateSpaceTooLarge { states: usize, cap: usize },

    #[error("strategy {0} has no analytical model")]
    UnsupportedStrategy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
