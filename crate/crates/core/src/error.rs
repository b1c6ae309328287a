//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph, model, and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid caller input (bad node label, dimension mismatch, unknown name, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value outside the support of a response family.
    #[error("domain error: {0}")]
    Domain(String),

    /// An invalid parameter value (e.g. nonpositive dispersion).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A request that would exceed a configured capacity (e.g. dense 2^K law).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A partially directed graph without a consistent DAG extension.
    #[error("inconsistent graph: {0}")]
    Inconsistent(String),

    /// A design that the generator does not support.
    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),

    /// I/O or (de)serialization failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
