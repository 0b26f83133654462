use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter or input violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A computation diverged, produced a non-finite value, or failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A profile was evaluated at a point where it is not defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few samples to perform a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::NumericalFailure(msg.into())
}
