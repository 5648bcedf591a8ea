use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::{ArtifactKind, Orchestrator, OrchestratorError, RunConfig};

#[derive(Debug, Deserialize)]
pub struct CreateRun {
    /// Scan file readable by the server.
    pub input: PathBuf,
    #[serde(default)]
    pub config: Option<RunConfig>,
}

#[derive(Debug, Deserialize)]
pub struct Utterance {
    pub text: String,
}

/// Error body `{"error": {"code", "message"}}` with a matching status.
pub struct ApiError(OrchestratorError);

impl From<OrchestratorError> for ApiError {
    fn from(e: OrchestratorError) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &OrchestratorError) -> StatusCode {
    use OrchestratorError as E;
    match e {
        E::NotFound(_) | E::NoArtifact(_) => StatusCode::NOT_FOUND,
        E::Conflict(_) => StatusCode::CONFLICT,
        E::MissingInput(_) | E::Config(_) | E::Json(_) => StatusCode::BAD_REQUEST,
        E::Protocol(_) | E::Wizard(_) | E::Stage { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        E::Integrity { .. } | E::Module(_) | E::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(json!({ "error": { "code": code, "message": message } }))).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        error_response(status_of(&self.0), self.0.code(), self.0.to_string())
    }
}

fn bad_body(r: JsonRejection) -> Response {
    error_response(StatusCode::BAD_REQUEST, "invalid_json", r.body_text())
}

/// Runs blocking pipeline work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> crate::Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(OrchestratorError::Io(std::io::Error::other(e.to_string())))),
    }
}

async fn healthz() -> Response {
    Json(json!({ "status": "ok" })).into_response()
}

async fn create_run(
    State(o): State<Arc<Orchestrator>>,
    body: Result<Json<CreateRun>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = match body {
        Ok(b) => b,
        Err(r) => return Ok(bad_body(r)),
    };
    let m = blocking(move || o.create_run(&req.input, req.config.unwrap_or_default())).await?;
    Ok((StatusCode::CREATED, Json(m)).into_response())
}

async fn get_run(State(o): State<Arc<Orchestrator>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let m = blocking(move || o.get_run(&id)).await?;
    Ok(Json(m).into_response())
}

async fn answer(
    State(o): State<Arc<Orchestrator>>,
    Path(id): Path<String>,
    body: Result<Json<Utterance>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(u) = match body {
        Ok(b) => b,
        Err(r) => return Ok(bad_body(r)),
    };
    let m = blocking(move || o.advance(&id, Some(&u.text), None)).await?;
    Ok(Json(m).into_response())
}

async fn advance(State(o): State<Arc<Orchestrator>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let m = blocking(move || o.advance(&id, None, None)).await?;
    Ok(Json(m).into_response())
}

async fn artifact(
    State(o): State<Arc<Orchestrator>>,
    Path((id, kind)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let kind = ArtifactKind::parse(&kind).ok_or_else(|| OrchestratorError::NoArtifact(kind.clone()))?;
    let bytes = blocking(move || o.artifact(&id, kind)).await?;
    Ok(([(header::CONTENT_TYPE, kind.content_type())], bytes).into_response())
}

async fn fallback() -> Response {
    error_response(StatusCode::NOT_FOUND, "not_found", "no such endpoint".to_string())
}

pub fn router(o: Arc<Orchestrator>) -> Router {
    Router::new()
        .route("/v1/healthz", get(healthz))
        .route("/v1/runs", post(create_run))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/wizard", post(answer))
        .route("/v1/runs/{id}/advance", post(advance))
        .route("/v1/runs/{id}/artifacts/{kind}", get(artifact))
        .fallback(fallback)
        .with_state(o)
}

/// Serves the API until ctrl-c.
pub async fn serve(addr: &str, o: Arc<Orchestrator>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(o))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
