//! Routes over [`AppState`].
//!
//! | method | path | body / params |
//! |---|---|---|
//! | POST | `/api/search` | [`SearchRequest`] |
//! | POST | `/api/refresh` | [`RefreshRequest`] |
//! | GET | `/api/suggest` | `facet`, optional `query` (JSON-encoded query) |
//! | GET | `/api/members` | `q`, optional `limit` |
//! | GET | `/api/members/{id}` | |
//! | GET | `/api/health` | |
//! | POST | `/api/reload` | reloads the snapshot source |
//!
//! Errors are JSON [`ErrorBody`](crate::error::ErrorBody) objects: 400 for
//! validation failures, 404 for unknown members.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query as UrlQuery, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use qbe_core::corpus::MemberId;
use qbe_core::query_builder::StructuredQuery;

use crate::api::{self, HealthResponse, MemberSummary, MemberView, RefreshRequest, SearchRequest, SearchResponse};
use crate::api::SuggestResponse;
use crate::error::ServiceError;
use crate::snapshot::{AppState, Snapshot};

type Shared = Arc<AppState>;
type Reply<T> = Result<Json<T>, ServiceError>;

/// The API routes, plus static files from `static_dir` for every other path.
pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/search", post(search))
        .route("/api/refresh", post(refresh))
        .route("/api/suggest", get(suggest))
        .route("/api/members", get(member_search))
        .route("/api/members/{id}", get(member))
        .route("/api/health", get(health))
        .route("/api/reload", post(reload))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Shared, static_dir: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Runs `f` on the blocking pool against the snapshot current at call time.
async fn on_snapshot<T, F>(state: &Shared, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Snapshot) -> Result<T, ServiceError> + Send + 'static,
{
    let snap = state.snapshot();
    tokio::task::spawn_blocking(move || f(&snap))
        .await
        .map_err(|e| ServiceError::Internal(format!("request task failed: {e}")))?
}

fn bad_body(e: JsonRejection) -> ServiceError {
    ServiceError::Validation(e.body_text())
}

async fn search(State(state): State<Shared>, body: Result<Json<SearchRequest>, JsonRejection>) -> Reply<SearchResponse> {
    let Json(req) = body.map_err(bad_body)?;
    on_snapshot(&state, move |s| api::handle_search(s, &req)).await.map(Json)
}

async fn refresh(
    State(state): State<Shared>,
    body: Result<Json<RefreshRequest>, JsonRejection>,
) -> Reply<SearchResponse> {
    let Json(req) = body.map_err(bad_body)?;
    on_snapshot(&state, move |s| api::handle_refresh(s, &req)).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct SuggestParams {
    facet: String,
    #[serde(default)]
    query: Option<String>,
}

async fn suggest(
    State(state): State<Shared>,
    params: Result<UrlQuery<SuggestParams>, QueryRejection>,
) -> Reply<SuggestResponse> {
    let UrlQuery(p) = params.map_err(|e| ServiceError::Validation(e.body_text()))?;
    let query: StructuredQuery<f64> = match p.query.as_deref().filter(|q| !q.trim().is_empty()) {
        Some(text) => serde_json::from_str(text).map_err(|e| ServiceError::Validation(format!("query: {e}")))?,
        None => StructuredQuery::default(),
    };
    on_snapshot(&state, move |s| api::handle_suggest(s, &query, &p.facet))
        .await
        .map(Json)
}

#[derive(Debug, Deserialize)]
struct MemberParams {
    #[serde(default)]
    q: String,
    #[serde(default)]
    limit: Option<usize>,
}

async fn member_search(
    State(state): State<Shared>,
    params: Result<UrlQuery<MemberParams>, QueryRejection>,
) -> Reply<Vec<MemberSummary>> {
    let UrlQuery(p) = params.map_err(|e| ServiceError::Validation(e.body_text()))?;
    api::handle_member_search(&state.snapshot(), &p.q, p.limit).map(Json)
}

async fn member(State(state): State<Shared>, id: Result<UrlPath<MemberId>, PathRejection>) -> Reply<MemberView> {
    let UrlPath(id) = id.map_err(|e| ServiceError::Validation(e.body_text()))?;
    api::handle_member(&state.snapshot(), id).map(Json)
}

async fn health(State(state): State<Shared>) -> Json<HealthResponse> {
    Json(api::handle_health(&state.snapshot()))
}

async fn reload(State(state): State<Shared>) -> Reply<HealthResponse> {
    let s = state.clone();
    let snap = tokio::task::spawn_blocking(move || s.reload())
        .await
        .map_err(|e| ServiceError::Internal(format!("reload task failed: {e}")))??;
    tracing::info!(version = %snap.version, "snapshot reloaded");
    Ok(Json(api::handle_health(&snap)))
}
