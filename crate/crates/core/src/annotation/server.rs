//! HTTP front end for [`ReviewService`].

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use super::{CategorySet, Decision, ReviewService};
use crate::error::{Error, Result};

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            e if e.is_validation() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (
            status,
            Json(serde_json::json!({ "error": self.0.to_string() })),
        )
            .into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Deserialize)]
struct QueueQuery {
    annotator: String,
    session: Option<String>,
}

#[derive(Deserialize)]
struct SessionQuery {
    session: String,
    categories: Option<String>,
}

async fn queue(
    State(svc): State<Arc<ReviewService>>,
    Query(q): Query<QueueQuery>,
) -> ApiResult<Vec<super::QueueItem>> {
    Ok(Json(svc.queue(&q.annotator, q.session.as_deref())?))
}

async fn decision(
    State(svc): State<Arc<ReviewService>>,
    Json(d): Json<Decision>,
) -> ApiResult<Decision> {
    // fsync happens inside; keep it off the async workers
    let stored = tokio::task::spawn_blocking(move || svc.submit(d))
        .await
        .map_err(|e| Error::Runtime(format!("decision writer failed: {e}")))??;
    Ok(Json(stored))
}

async fn agreement(
    State(svc): State<Arc<ReviewService>>,
    Query(q): Query<SessionQuery>,
) -> ApiResult<super::AgreementView> {
    let categories = match q.categories.as_deref() {
        Some(c) => c.parse()?,
        None => CategorySet::default(),
    };
    Ok(Json(svc.agreement(&q.session, categories)?))
}

async fn progress(
    State(svc): State<Arc<ReviewService>>,
    Query(q): Query<SessionQuery>,
) -> ApiResult<super::ProgressView> {
    Ok(Json(svc.progress(&q.session)?))
}

/// API routes, plus the review UI bundle at `/` when `static_dir` is given.
pub fn router(svc: Arc<ReviewService>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/queue", get(queue))
        .route("/api/decision", post(decision))
        .route("/api/agreement", get(agreement))
        .route("/api/progress", get(progress))
        .with_state(svc);
    match static_dir {
        Some(dir) => {
            api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true))
        }
        None => api,
    }
}

/// Serves until ctrl-c.
pub async fn serve_api(
    svc: Arc<ReviewService>,
    addr: SocketAddr,
    static_dir: Option<&Path>,
) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::Runtime(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(%addr, "review service listening");
    axum::serve(listener, router(svc, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::Runtime(format!("server error: {e}")))
}
