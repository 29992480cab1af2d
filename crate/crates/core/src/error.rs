use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite numeric input: {0}")]
    NumericInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("training failed after {epochs} epochs: {reason}")]
    Training { reason: String, epochs: usize },

    #[error("net format error: {0}")]
    Format(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failure classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Training,
    Runtime,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::Parse(_)
            | Error::Format(_)
            | Error::Topology(_)
            | Error::Dimension { .. } => ErrorClass::Config,
            Error::Training { .. } => ErrorClass::Training,
            Error::NumericInput(_) | Error::Io(_) => ErrorClass::Runtime,
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
