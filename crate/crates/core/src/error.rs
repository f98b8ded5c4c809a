use thiserror::Error;

/// Errors produced by the fbsp library.
///
/// Variants are grouped so that front ends can map them onto exit codes:
/// [`Error::Validation`] for bad inputs or configuration and
/// [`Error::Numerical`] for failures that arise during computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("sinc singularity: {0}")]
    Singularity(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by the inputs rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Shape(_) | Error::Json(_) | Error::Wav(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
