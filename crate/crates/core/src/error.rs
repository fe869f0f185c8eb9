//! Error type shared by every module in the crate.

use core::fmt;

/// Failure modes surfaced to callers. Hot loops keep internal invariants as
/// debug assertions; anything a caller can trigger comes back as one of
/// these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A caller-supplied argument violated a documented precondition.
    InvalidArgument(&'static str),
    /// The operation does not apply to the current state of the value.
    InvalidState(&'static str),
    /// A numeric routine did not converge or produced non-finite values.
    NumericFailure(&'static str),
    /// Two inputs that must agree in size do not.
    DimensionMismatch { expected: usize, got: usize },
    /// The request exceeds a hard resource guard and was refused.
    ResourceLimit(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::NumericFailure(msg) => write!(f, "numeric failure: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::ResourceLimit(msg) => write!(f, "resource limit: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
