use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sketchrefine::pipeline::{run_pipeline, run_project, ProjectRequest, RefineRequest};
use sketchrefine::shape_space::ShapeSpaceIndex;
use sketchrefine::structure::SkeletonPrior;
use sketchrefine::Error;
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::CorsLayer;

/// Largest accepted request body.
pub const BODY_LIMIT: usize = 32 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("index file {0} not found")]
    IndexNotFound(PathBuf),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl StartupError {
    pub fn code(&self) -> &'static str {
        match self {
            StartupError::IndexNotFound(_) => "index_not_found",
            StartupError::PortInUse(_) => "port_in_use",
            StartupError::Bind { .. } => "bind_failed",
            StartupError::Core(e) => e.code(),
            StartupError::Io(_) => "io_error",
        }
    }

    pub fn is_data_error(&self) -> bool {
        match self {
            StartupError::IndexNotFound(_) => true,
            StartupError::Core(e) => e.is_data_error(),
            _ => false,
        }
    }
}

pub async fn bind(host: &str, port: u16) -> Result<TcpListener, StartupError> {
    let addr = format!("{host}:{port}");
    TcpListener::bind(&addr)
        .await
        .map_err(|source| match source.kind() {
            io::ErrorKind::AddrInUse => StartupError::PortInUse(port),
            _ => StartupError::Bind { addr, source },
        })
}

/// Read-only model shared by every request.
#[derive(Clone)]
pub struct AppState {
    pub index: Arc<ShapeSpaceIndex>,
    pub prior: Arc<SkeletonPrior>,
}

impl AppState {
    pub fn new(index: ShapeSpaceIndex, prior: SkeletonPrior) -> Self {
        AppState {
            index: Arc::new(index),
            prior: Arc::new(prior),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/index/stats", get(stats))
        .route("/refine", post(refine))
        .route("/project", post(project))
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = if e.is_data_error() {
            StatusCode::UNPROCESSABLE_ENTITY
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        let code = if e.is_data() {
            "invalid_request"
        } else {
            "bad_json"
        };
        ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string())
    })
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

#[derive(Debug, Serialize)]
struct ClassStats {
    class: &'static str,
    n: usize,
    d: usize,
    p: usize,
}

#[derive(Debug, Serialize)]
struct IndexStats {
    format_version: u32,
    classes: Vec<ClassStats>,
    prior_bones: usize,
}

async fn stats(State(state): State<AppState>) -> Json<IndexStats> {
    let classes = state
        .index
        .spaces
        .iter()
        .map(|(c, s)| ClassStats {
            class: c.name(),
            n: s.len(),
            d: s.dim(),
            p: s.part_size,
        })
        .collect();
    Json(IndexStats {
        format_version: sketchrefine::corpus::FORMAT_VERSION,
        classes,
        prior_bones: state.prior.bones.len(),
    })
}

async fn refine(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: RefineRequest = parse_json(&body)?;
    let resp = blocking(move || run_pipeline(&req, &state.index, &state.prior)).await?;
    Ok(Json(resp).into_response())
}

async fn project(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: ProjectRequest = parse_json(&body)?;
    let resp = blocking(move || run_project(&req, &state.index)).await?;
    Ok(Json(resp).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}
