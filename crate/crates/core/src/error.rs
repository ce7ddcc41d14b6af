use thiserror::Error;

/// Errors raised by the geometry, discretization and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent sizes, counts or grids.
    #[error("configuration error: {0}")]
    Config(String),

    /// A zero (or non-finite) pivot was met during a tridiagonal solve.
    #[error("singular tridiagonal system: zero pivot at row {index}")]
    Singular { index: usize },

    /// A non-finite value appeared during the fixed-point iteration.
    #[error("divergence at iteration {iteration}: non-finite values in {field}")]
    Diverged { iteration: usize, field: String },

    /// Bad user input, naming the offending key.
    #[error("invalid value for `{key}`: {reason}")]
    Usage { key: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
