//! HTTP/JSON API over one community: inspect its shared-energy status,
//! upload candidates, run what-if scoring and admit or reject.
//!
//! Every mutating request bumps `revision` by one and rewrites the snapshot
//! file before the change becomes visible. Clients that send
//! `If-Match: <revision>` get `409 Conflict` when another mutation got there
//! first.

mod error;
mod handlers;
mod snapshot;
mod state;

use std::path::PathBuf;

use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use snapshot::{Snapshot, SnapshotError, StoredCandidate};
pub use state::AppState;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    /// Origin allowed to call the API from a browser.
    pub cors_origin: Option<String>,
    /// Directory of dashboard assets served under `/`.
    pub static_dir: Option<PathBuf>,
}

pub fn router(state: AppState, options: &ServiceOptions) -> Router {
    let api = Router::new()
        .route("/api/health", get(handlers::health))
        .route("/api/community", get(handlers::community))
        .route("/api/model", get(handlers::model))
        .route("/api/candidates", get(handlers::list_candidates).post(handlers::upload_candidate))
        .route("/api/whatif/{candidate_id}", post(handlers::whatif))
        .route("/api/admit/{candidate_id}", post(handlers::admit))
        .route("/api/reject/{candidate_id}", post(handlers::reject))
        .with_state(state);

    let mut app = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    if let Some(origin) = &options.cors_origin {
        if let Ok(origin) = HeaderValue::from_str(origin) {
            app = app.layer(
                CorsLayer::new()
                    .allow_origin(origin)
                    .allow_methods([Method::GET, Method::POST])
                    .allow_headers([header::CONTENT_TYPE, header::IF_MATCH])
                    .expose_headers([header::ETAG]),
            );
        }
    }
    app
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(
    listener: tokio::net::TcpListener,
    state: AppState,
    options: &ServiceOptions,
    shutdown: F,
) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, revision = state.revision(), "listening");
    }
    axum::serve(listener, router(state, options)).with_graceful_shutdown(shutdown).await
}
