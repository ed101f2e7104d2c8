use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: invalid field `{field}`: {message}")]
    InvalidField {
        line: usize,
        field: String,
        message: String,
    },

    #[error("invalid record `{scenario_id}`: {message}")]
    InvalidRecord {
        scenario_id: String,
        message: String,
    },

    #[error("image `{image_id}` has {count} scenarios (max 5); call truncate_lists first")]
    ListTooLong { image_id: String, count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} is undefined for this input")]
    Undefined(&'static str),

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Data and validation problems, as opposed to runtime failures.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Training(_) | Error::Io(_))
    }
}
