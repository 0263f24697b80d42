use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("gone: {0}")]
    Gone(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no attentive completed sessions to aggregate")]
    EmptyAggregate,
    #[error("corrupt event log: {0}")]
    CorruptLog(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(memorability::Error),
}

impl From<memorability::Error> for ServerError {
    fn from(e: memorability::Error) -> Self {
        use memorability::Error as E;
        match e {
            E::EmptyAggregate => ServerError::EmptyAggregate,
            E::InvalidInput(m) | E::InfeasibleSequence(m) | E::Format(m) => ServerError::InvalidInput(m),
            E::Io(e) => ServerError::Io(e),
            other => ServerError::Core(other),
        }
    }
}

pub type Result<T, E = ServerError> = std::result::Result<T, E>;

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

impl ServerError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServerError::NotFound(_) => StatusCode::NOT_FOUND,
            ServerError::Conflict(_) => StatusCode::CONFLICT,
            ServerError::Gone(_) => StatusCode::GONE,
            ServerError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            ServerError::EmptyAggregate => StatusCode::UNPROCESSABLE_ENTITY,
            ServerError::CorruptLog(_) | ServerError::Io(_) | ServerError::Core(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ServerError::NotFound(_) => "not_found",
            ServerError::Conflict(_) => "conflict",
            ServerError::Gone(_) => "gone",
            ServerError::InvalidInput(_) => "invalid_input",
            ServerError::EmptyAggregate => "empty_aggregate",
            ServerError::CorruptLog(_) => "corrupt_log",
            ServerError::Io(_) | ServerError::Core(_) => "internal",
        }
    }
}

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
