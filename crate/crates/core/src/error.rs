use thiserror::Error;

/// Errors raised by the simulation, transform and registration routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("buffer length {len} does not match {width}x{height}")]
    BadLength {
        width: usize,
        height: usize,
        len: usize,
    },

    #[error("image of {width}x{height} is too small, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mask is empty")]
    EmptyMask,

    #[error("objective became non-finite at level {level}, iteration {iteration} (trace: {trace:?})")]
    NonFiniteObjective {
        level: usize,
        iteration: usize,
        trace: Vec<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
