use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// An iteration failed to converge or produced an impossible value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The quantity is undefined for this input (e.g. no successful traces).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Input data is malformed or insufficient.
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse classification used to map errors onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Domain,
    Numeric,
    Data,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) => ErrorKind::Domain,
            Error::Numeric(_) | Error::Degenerate(_) => ErrorKind::Numeric,
            Error::Data(_) => ErrorKind::Data,
            Error::Io(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

/// Rejects non-finite or non-positive values.
pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {value}")))
    }
}

pub(crate) fn ensure_non_negative(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(format!("{name} must be non-negative and finite, got {value}")))
    }
}
