use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::experiment::Manifest;
use crate::service::MushraService;
use crate::{io_err, MushraError};

/// One lock serializes every state change, which also makes the record
/// log single-writer.
pub type SharedService = Arc<Mutex<MushraService>>;

struct ApiError(MushraError);

impl From<MushraError> for ApiError {
    fn from(e: MushraError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            MushraError::Manifest(_) => (StatusCode::UNPROCESSABLE_ENTITY, "manifest"),
            MushraError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            MushraError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            MushraError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            MushraError::EmptyReport(_) => (StatusCode::NOT_FOUND, "empty_report"),
            MushraError::Eval(_) => (StatusCode::UNPROCESSABLE_ENTITY, "statistics"),
            MushraError::Log { .. } | MushraError::Io { .. } | MushraError::Core(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        if status.is_server_error() {
            log::error!("{}", self.0);
        }
        (status, Json(serde_json::json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn lock(svc: &SharedService) -> MutexGuard<'_, MushraService> {
    // A panic mid-request cannot leave a half-applied event: the log is
    // appended before the in-memory state changes.
    svc.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    #[serde(default)]
    listener: serde_json::Value,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct RatingRequest {
    scores: BTreeMap<String, serde_json::Value>,
}

async fn create_experiment(State(svc): State<SharedService>, Json(manifest): Json<Manifest>) -> ApiResult<Response> {
    let exp = lock(&svc).create_experiment(manifest)?;
    Ok((StatusCode::CREATED, Json(exp)).into_response())
}

async fn get_experiment(State(svc): State<SharedService>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    Ok(Json(lock(&svc).experiment(&id)?.clone()).into_response())
}

async fn create_session(State(svc): State<SharedService>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let req: SessionRequest = if body.iter().all(u8::is_ascii_whitespace) {
        SessionRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| MushraError::Validation(format!("session request: {e}")))?
    };
    let info = lock(&svc).create_session(&id, req.listener, req.seed)?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn get_session(State(svc): State<SharedService>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    Ok(Json(lock(&svc).session_info(&id)?).into_response())
}

async fn next_trial(State(svc): State<SharedService>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    Ok(Json(lock(&svc).next_trial(&id)?).into_response())
}

async fn submit_ratings(State(svc): State<SharedService>, UrlPath((id, n)): UrlPath<(String, usize)>, Json(req): Json<RatingRequest>) -> ApiResult<Response> {
    let mut scores = BTreeMap::new();
    for (label, value) in req.scores {
        let score = value.as_i64().ok_or_else(|| MushraError::Validation(format!("score for condition {label} must be an integer, got {value}")))?;
        scores.insert(label, score);
    }
    Ok(Json(lock(&svc).submit_ratings(&id, n, &scores)?).into_response())
}

async fn get_ratings(State(svc): State<SharedService>, UrlPath((id, n)): UrlPath<(String, usize)>) -> ApiResult<Response> {
    Ok(Json(lock(&svc).rating(&id, n)?.clone()).into_response())
}

async fn report(State(svc): State<SharedService>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    Ok(Json(lock(&svc).report(&id)?).into_response())
}

async fn audio(State(svc): State<SharedService>, UrlPath((id, n, slot)): UrlPath<(String, usize, String)>) -> ApiResult<Response> {
    let path = lock(&svc).audio_path(&id, n, &slot)?;
    let bytes = tokio::fs::read(&path).await.map_err(io_err(&path))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav"), (header::CACHE_CONTROL, "no-store")], bytes).into_response())
}

pub fn router(svc: SharedService) -> Router {
    Router::new()
        .route("/experiments", post(create_experiment))
        .route("/experiments/{id}", get(get_experiment))
        .route("/experiments/{id}/sessions", post(create_session))
        .route("/experiments/{id}/report", get(report))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/trials/next", get(next_trial))
        .route("/sessions/{id}/trials/{n}/ratings", post(submit_ratings).get(get_ratings))
        .route("/audio/{session}/{trial}/{slot}", get(audio))
        .with_state(svc)
}

/// Replays the record log in `data_dir` and serves the API on `addr`
/// until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: &Path) -> crate::Result<()> {
    let svc = Arc::new(Mutex::new(MushraService::open(data_dir)?));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(io_err(addr.to_string()))?;
    log::info!("MUSHRA service listening on {addr}, data in {}", data_dir.display());
    axum::serve(listener, router(svc)).await.map_err(io_err(addr.to_string()))
}
