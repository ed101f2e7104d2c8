use std::fmt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Runtime = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Runtime,
            message: message.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<morale_core::Error> for CliError {
    fn from(e: morale_core::Error) -> Self {
        if e.is_data_error() {
            Self::data(e.to_string())
        } else {
            Self::runtime(e.to_string())
        }
    }
}

impl From<morale_service::EngineError> for CliError {
    fn from(e: morale_service::EngineError) -> Self {
        match e {
            morale_service::EngineError::Storage(_) | morale_service::EngineError::Internal(_) => {
                Self::runtime(e.to_string())
            }
            _ => Self::data(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
