//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A JSONL line (or other structured file) failed to parse.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A loaded object violates a data invariant.
    #[error("validation error in instance `{instance}`, field `{field}`: {message}")]
    Validation {
        instance: String,
        field: String,
        message: String,
    },

    /// An operation was called with arguments that violate its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An entity-pair/relation combination outside the legality matrix.
    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(
        instance: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            instance: instance.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
