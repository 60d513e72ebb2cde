//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library and the CLI.
///
/// `BadInput` marks caller mistakes (malformed files, missing models,
/// invalid configuration values); the CLI maps it to exit code 2.
/// Everything else is a runtime failure (exit code 1).
#[derive(Debug, Error)]
pub enum RahiError {
    /// A distribution or model parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed user-supplied input (files, config, CLI arguments).
    #[error("bad input: {0}")]
    BadInput(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Internal consistency failure (e.g. training on an empty split).
    #[error("{0}")]
    Invalid(String),
}

impl RahiError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        RahiError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, RahiError>;
