//! HTTP front for the harness service.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use voicecue_core::harness::{Experiment, HarnessError, HarnessService, ResponseMessage};

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<HarnessService>,
    pub default_profile: String,
}

pub struct ApiError(HarnessError);

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            HarnessError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            HarnessError::Validation(_) => (StatusCode::BAD_REQUEST, "validation"),
            HarnessError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            HarnessError::State(_) => (StatusCode::CONFLICT, "state"),
            HarnessError::EarlyResponse { .. } => (StatusCode::TOO_EARLY, "early_response"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({ "error": kind, "message": self.0.to_string() });
        if let HarnessError::EarlyResponse { enabled_after_ms, .. } = self.0 {
            body["retry"] = json!(true);
            body["enabled_after_ms"] = json!(enabled_after_ms);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Service calls touch the disk and may synthesize audio, so they run off the async workers.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&HarnessService) -> Result<T, HarnessError> + Send + 'static,
{
    let service = Arc::clone(&state.service);
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ApiError(HarnessError::Validation(format!("worker failed: {e}"))))?
        .map_err(ApiError)
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub experiment: String,
    pub profile: Option<String>,
    pub seed: Option<u64>,
}

async fn create(State(state): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult<Response> {
    let experiment: Experiment = req.experiment.parse()?;
    let profile = req.profile.unwrap_or_else(|| state.default_profile.clone());
    let record = blocking(&state, move |s| s.create_session(experiment, &profile, req.seed)).await?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn record(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.record(&id)).await?).into_response())
}

async fn next(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.next_trial(&id)).await?).into_response())
}

async fn pending(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.pending(&id)).await?).into_response())
}

async fn respond(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(msg): Json<ResponseMessage>,
) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.submit_response(&id, msg)).await?).into_response())
}

async fn pause(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.pause(&id)).await?).into_response())
}

async fn abort(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.abort(&id)).await?).into_response())
}

async fn results(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(&state, move |s| s.results(&id)).await?).into_response())
}

async fn audio(State(state): State<AppState>, Path(file): Path<String>) -> ApiResult<Response> {
    let hash = file
        .strip_suffix(".wav")
        .ok_or_else(|| HarnessError::NotFound(file.clone()))?
        .to_string();
    let bytes = blocking(&state, move |s| s.audio_wav(&hash)).await?;
    Ok(([(header::CONTENT_TYPE, "audio/wav"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")], bytes)
        .into_response())
}

async fn profiles(State(state): State<AppState>) -> Response {
    let names: Vec<&str> = state.service.profiles().names().collect();
    Json(json!({ "profiles": names, "default": state.default_profile })).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/profiles", get(profiles))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(record))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/pending", get(pending))
        .route("/sessions/{id}/response", post(respond))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/abort", post(abort))
        .route("/sessions/{id}/results", get(results))
        .route("/audio/{file}", get(audio))
        .with_state(state)
}

pub async fn serve(state: AppState, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
