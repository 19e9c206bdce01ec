use thiserror::Error;

/// Errors raised by the samplers, proximal solvers and models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure after {iterations} iterations: {message}")]
    NumericalFailure { message: String, iterations: usize },

    #[error("non-finite potential at the supplied point")]
    Domain,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("chain diverged at step {step}")]
    Diverged { step: usize, state: Vec<f64> },

    #[error("rate bound violated on clock {clock} at t = {time}: rate {rate} > bound {bound}")]
    BoundViolation {
        clock: usize,
        time: f64,
        rate: f64,
        bound: f64,
    },

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("validation failed: {0}")]
    ValidationFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("event log capacity of {0} events exceeded")]
    CapacityExceeded(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
