use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("occupancy measure violates {constraint} by {residual:e}")]
    InvalidOccupancy { constraint: &'static str, residual: f64 },

    #[error("reference occupancy is zero at state {state}, action {action} where the argument is positive")]
    SupportViolation { state: usize, action: usize },

    #[error("estimator denominator is zero at state {state}, action {action}")]
    ZeroDenominator { state: usize, action: usize },

    #[error("dual solver stopped after {iterations} iterations with residual {residual:e}")]
    DualNotConverged { iterations: usize, residual: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("perfect predictor requires the true next cost table")]
    MissingOracle,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
