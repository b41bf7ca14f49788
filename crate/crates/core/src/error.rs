use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (bad bracket, bad grid, bad parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Adaptive integration could not continue (step-size underflow,
    /// non-finite field values). Carries the last abscissa reached.
    #[error("integration failed at {reached}: {reason}")]
    IntegrationFailure { reached: f64, reason: String },

    /// Requested point lies outside a tabulated range.
    #[error("out of range: {0}")]
    Range(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
