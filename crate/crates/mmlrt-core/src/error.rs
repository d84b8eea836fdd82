//! Crate-wide error type.
//!
//! Validation errors mean the caller handed us something malformed (bad
//! simplex, negative rate, inconsistent dimensions).  Domain errors mean the
//! inputs were well-formed but the requested quantity does not exist there
//! (score statistic at the null rate, Gumbel centering below the minimum
//! sample size).  Parse errors carry file/line diagnostics so CLI users can
//! find the offending record.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dimensions, simplex constraints, sign constraints.
    #[error("validation: {0}")]
    Validation(String),

    /// Well-formed input outside the domain of the requested operation.
    #[error("domain: {0}")]
    Domain(String),

    /// A file failed to parse; points at the record that broke.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Model fitting failed in a way that is not a caller error
    /// (e.g. every observation has zero likelihood under a fixed null).
    #[error("fit: {0}")]
    Fit(String),

    /// Environment failure (thread pool construction and the like).
    #[error("runtime: {0}")]
    Runtime(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
