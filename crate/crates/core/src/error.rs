//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched groups, non-subgroups, wrong lengths and similar misuse.
    #[error("structural error: {0}")]
    Structural(String),

    /// Input data that fails validation (channel files, plans, tolerances).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A configured resource ceiling would be exceeded.
    #[error("capacity exceeded: {what} would be {requested}, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    /// Numerical breakdown, e.g. a vanishing post-measurement norm.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown check id `{0}`")]
    UnknownCheck(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Validation error `"{prefix}: {cause}"`, without repeating the
    /// variant prefix when `cause` is itself a validation error.
    pub(crate) fn invalid_at(prefix: impl std::fmt::Display, cause: Error) -> Self {
        match cause {
            Error::Validation(m) => Error::Validation(format!("{prefix}: {m}")),
            other => Error::Validation(format!("{prefix}: {other}")),
        }
    }
}
