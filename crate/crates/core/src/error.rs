use thiserror::Error;

use crate::feedback::FeedbackKey;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or configuration violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A required CSV column is absent from the header.
    #[error("missing column `{column}` in header of {source_name}")]
    MissingColumn { column: String, source_name: String },

    /// A CSV record could not be parsed.
    #[error("{source_name}: line {line}: {message}")]
    Malformed {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("no prediction for user `{}` item `{}`", .0.user_id, .0.item_id)]
    MissingPrediction(FeedbackKey),

    /// A derived quantity has no defined value for the given data.
    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True when the error stems from user-supplied data or configuration
    /// rather than from the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
