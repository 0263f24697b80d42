use thiserror::Error;

/// Errors produced by the workbench library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A statistic is undefined for the given data (e.g. correlation of a constant vector).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient participants: need {needed}, have {available}")]
    InsufficientParticipants { needed: usize, available: usize },

    #[error("gave up after {attempts} attempts: {accepted} of {wanted} splits were non-degenerate")]
    TooManyDegenerateSplits {
        attempts: usize,
        accepted: usize,
        wanted: usize,
    },

    #[error("infeasible sequence: {0}")]
    InfeasibleSequence(String),

    #[error("no attentive sessions to aggregate")]
    EmptyAggregate,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("csv: {other:?}")),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(format!("json: {e}"))
        }
    }
}
