//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by scenario parsing, validation, and the numerical
/// routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The configuration document could not be parsed.
    #[error("config parse error: {0}")]
    Parse(String),

    /// A scenario or sweep field violates an invariant. The message starts
    /// with the offending field name.
    #[error("{field} {message}")]
    Invalid {
        /// Name of the offending configuration field.
        field: String,
        /// Human-readable description of the violated constraint.
        message: String,
    },

    /// Matrix or vector dimensions are inconsistent.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical operation failed (non-PSD input, singular system, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// File-system failure while reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Validation error naming the offending field.
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
