use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{message}")]
    Validation { code: &'static str, message: String },

    #[error("{message}")]
    Conflict { code: &'static str, message: String },

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("scorer failed: {0}")]
    Scorer(String),

    #[error("corrupt event log: {0}")]
    Corrupt(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),

    #[error("{0}")]
    Internal(String),
}

impl EngineError {
    /// Machine-readable code sent to clients.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Validation { code, .. } | EngineError::Conflict { code, .. } => code,
            EngineError::UnknownSession(_) => "UNKNOWN_SESSION",
            EngineError::Scorer(_) => "SCORER_FAILED",
            EngineError::Corrupt(_) => "CORRUPT_LOG",
            EngineError::Config(_) => "BAD_CONFIG",
            EngineError::Storage(_) => "STORAGE_FAILED",
            EngineError::Internal(_) => "INTERNAL",
        }
    }
}

impl PartialEq for EngineError {
    fn eq(&self, other: &Self) -> bool {
        self.code() == other.code() && self.to_string() == other.to_string()
    }
}
