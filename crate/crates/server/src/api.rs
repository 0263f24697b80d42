//! HTTP routes. Request and response bodies are JSON; timestamps are
//! integer milliseconds since the Unix epoch.
//!
//! | Method | Path | Body | Success |
//! |---|---|---|---|
//! | POST | `/experiments` | [`CreateExperiment`] | 201 [`ExperimentSummary`] |
//! | GET | `/experiments/{id}` | | 200 [`ExperimentSummary`] |
//! | POST | `/experiments/{id}/sessions` | `{"participant_id": ...}` | 201 [`SessionDescriptor`] |
//! | GET | `/sessions/{id}/schedule` | | 200 [`SessionDescriptor`] |
//! | POST | `/sessions/{id}/responses` | [`ResponseIn`] | 200 [`ResponseAck`] |
//! | POST | `/sessions/{id}/complete` | | 200 `SessionScore` |
//! | GET | `/experiments/{id}/export?format=csv\|jsonl&part=table\|matrix` | | 200 file body |
//!
//! Errors are `{"error": kind, "message": ...}` with status 400
//! (`invalid_input`), 404 (`not_found`), 409 (`conflict`), 410 (`gone`),
//! 422 (`empty_aggregate`) or 500. Static stimuli are served under `/stimuli/`.

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::error::{Result, ServerError};
use crate::store::{CreateExperiment, ExportFormat, ExportPart, ResponseIn, Store};

#[derive(Debug, Deserialize)]
pub struct NewSession {
    pub participant_id: String,
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    pub format: Option<String>,
    pub part: Option<String>,
}

/// Runs a store operation off the async workers; store calls block on file IO.
async fn blocking<T, F>(store: &Arc<Store>, f: F) -> Result<T>
where
    T: Send + 'static,
    F: FnOnce(&Store) -> Result<T> + Send + 'static,
{
    let store = Arc::clone(store);
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServerError::Io(std::io::Error::other(e)))?
}

async fn create_experiment(
    State(store): State<Arc<Store>>,
    Json(req): Json<CreateExperiment>,
) -> Result<impl IntoResponse> {
    let summary = blocking(&store, move |s| s.create_experiment(req)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_experiment(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    Ok(Json(store.experiment_summary(&id)?))
}

async fn create_session(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Json(req): Json<NewSession>,
) -> Result<impl IntoResponse> {
    let d = blocking(&store, move |s| s.create_session(&id, &req.participant_id)).await?;
    Ok((StatusCode::CREATED, Json(d)))
}

async fn schedule(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    Ok(Json(store.schedule(&id)?))
}

async fn record_response(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Json(req): Json<ResponseIn>,
) -> Result<impl IntoResponse> {
    let ack = blocking(&store, move |s| s.record_response(&id, req)).await?;
    Ok(Json(ack))
}

async fn complete(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<impl IntoResponse> {
    let score = blocking(&store, move |s| s.complete_session(&id)).await?;
    Ok(Json(score))
}

async fn export(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<impl IntoResponse> {
    let format = match q.format.as_deref().unwrap_or("csv") {
        "csv" => ExportFormat::Csv,
        "jsonl" => ExportFormat::Jsonl,
        other => return Err(ServerError::InvalidInput(format!("unknown export format {other:?}"))),
    };
    let part = match q.part.as_deref() {
        None => None,
        Some("table") => Some(ExportPart::Table),
        Some("matrix") => Some(ExportPart::Matrix),
        Some(other) => return Err(ServerError::InvalidInput(format!("unknown export part {other:?}"))),
    };
    let body = blocking(&store, move |s| s.export(&id, format, part)).await?;
    let content_type = match format {
        ExportFormat::Csv => "text/csv; charset=utf-8",
        ExportFormat::Jsonl => "application/x-ndjson",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body))
}

pub fn router(store: Arc<Store>, stimuli_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/experiments", post(create_experiment))
        .route("/experiments/{id}", get(get_experiment))
        .route("/experiments/{id}/sessions", post(create_session))
        .route("/experiments/{id}/export", get(export))
        .route("/sessions/{id}/schedule", get(schedule))
        .route("/sessions/{id}/responses", post(record_response))
        .route("/sessions/{id}/complete", post(complete))
        .with_state(store);
    match stimuli_dir {
        Some(dir) => api.nest_service("/stimuli", ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the API on `addr` until ctrl-c.
pub async fn serve(addr: std::net::SocketAddr, store: Arc<Store>, stimuli_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store, stimuli_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
