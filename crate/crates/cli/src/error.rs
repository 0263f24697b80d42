use std::fmt;

/// Failure of a command, mapped to the process exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config (exit 1).
    Usage(String),
    /// Unreadable, malformed or unsuitable input data (exit 2).
    Data(String),
    /// Anything else (exit 3).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<memorability::Error> for CliError {
    fn from(e: memorability::Error) -> Self {
        match e {
            memorability::Error::Numerical(m) => CliError::Internal(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<memorability_server::ServerError> for CliError {
    fn from(e: memorability_server::ServerError) -> Self {
        use memorability_server::ServerError as S;
        match e {
            S::Io(_) | S::Core(_) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
