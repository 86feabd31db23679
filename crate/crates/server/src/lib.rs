//! HTTP front end for an [`AnnotationStore`].
//!
//! Routes:
//!
//! | method | path              | body / query                   |
//! |--------|-------------------|--------------------------------|
//! | GET    | `/api/next`       | `annotator`, `protocol`        |
//! | POST   | `/api/annotation` | `AnnotationRecord`             |
//! | POST   | `/api/rating`     | `RatingSubmission`             |
//! | GET    | `/api/progress`   |                                |
//! | GET    | `/api/export`     | `protocol`                     |
//!
//! Everything else is served from the static directory, if one is set.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use docmine_core::annotation::{export, AnnotationError, FieldError, RatingSubmission};
use docmine_core::{AnnotationRecord, AnnotationStore, Protocol};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<AnnotationStore>,
    /// Shared bearer token required on `/api` routes when set.
    pub token: Option<String>,
    pub static_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(store: AnnotationStore) -> Self {
        Self {
            store: Arc::new(store),
            token: None,
            static_dir: None,
        }
    }
}

/// Error body of every non-2xx API response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

struct Failure(StatusCode, ApiError);

impl Failure {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self(
            status,
            ApiError {
                error: error.to_string(),
                message: message.into(),
                fields: Vec::new(),
            },
        )
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<AnnotationError> for Failure {
    fn from(e: AnnotationError) -> Self {
        let message = e.to_string();
        match e {
            AnnotationError::Validation(fields) => Self(
                StatusCode::UNPROCESSABLE_ENTITY,
                ApiError {
                    error: "validation".into(),
                    message,
                    fields,
                },
            ),
            AnnotationError::NotAssigned { .. } => Self::new(StatusCode::FORBIDDEN, "not_assigned", message),
            AnnotationError::UnknownAnnotator(_) => Self::new(StatusCode::NOT_FOUND, "unknown_annotator", message),
            _ => {
                log::error!("{message}");
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        }
    }
}

fn parse_protocol(raw: &str) -> Result<Protocol, Failure> {
    raw.parse()
        .map_err(|e: String| Failure::new(StatusCode::BAD_REQUEST, "bad_request", e))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, AnnotationError> + Send + 'static,
) -> Result<T, Failure> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(Failure::from)
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: String,
    protocol: String,
}

async fn next(State(s): State<AppState>, Query(q): Query<NextQuery>) -> Result<Response, Failure> {
    let protocol = parse_protocol(&q.protocol)?;
    let item = blocking(move || s.store.next_item(&q.annotator, protocol)).await?;
    Ok(Json(item).into_response())
}

async fn annotation(State(s): State<AppState>, Json(record): Json<AnnotationRecord>) -> Result<Response, Failure> {
    let ack = blocking(move || s.store.submit_annotation(record)).await?;
    Ok(Json(ack).into_response())
}

async fn rating(State(s): State<AppState>, Json(sub): Json<RatingSubmission>) -> Result<Response, Failure> {
    let ack = blocking(move || s.store.submit_rating(sub)).await?;
    Ok(Json(ack).into_response())
}

async fn progress(State(s): State<AppState>) -> Result<Response, Failure> {
    let p = blocking(move || Ok(s.store.progress())).await?;
    Ok(Json(p).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    protocol: String,
}

async fn export_route(State(s): State<AppState>, Query(q): Query<ExportQuery>) -> Result<Response, Failure> {
    let protocol = parse_protocol(&q.protocol)?;
    let body = blocking(move || {
        let mut buf = Vec::new();
        export(&s.store, protocol, &mut buf).map_err(|source| AnnotationError::Io {
            path: "export".into(),
            source,
        })?;
        Ok(buf)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn require_token(State(s): State<AppState>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = &s.token {
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return Failure::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><title>docmine</title></head>\n<body><p>docmine annotation service. No UI bundle configured; the JSON API is under <code>/api</code>.</p></body></html>\n";

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/next", get(next))
        .route("/annotation", post(annotation))
        .route("/rating", post(rating))
        .route("/progress", get(progress))
        .route("/export", get(export_route))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    let app = Router::new().nest("/api", api);
    let app = match &state.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER) })),
    };
    app.with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
