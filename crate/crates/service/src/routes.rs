use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;

use crate::query::{get_segment, get_segments, QueryError, SegmentQuery};
use crate::Store;

impl IntoResponse for QueryError {
    fn into_response(self) -> Response {
        let status = match self {
            QueryError::BadRequest(_) => StatusCode::BAD_REQUEST,
            QueryError::NotFound(_) => StatusCode::NOT_FOUND,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

async fn segments(
    State(store): State<Arc<Store>>,
    query: Result<Query<SegmentQuery>, QueryRejection>,
) -> Result<Response, QueryError> {
    let Query(q) = query.map_err(|e| QueryError::BadRequest(e.body_text()))?;
    Ok(Json(get_segments(&store, &q)?).into_response())
}

async fn segment(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Result<Response, QueryError> {
    let id: u64 = id
        .parse()
        .map_err(|_| QueryError::BadRequest(format!("segment id {id:?} is not an integer")))?;
    Ok(Json(get_segment(&store, id)?).into_response())
}

async fn stats(State(store): State<Arc<Store>>) -> Result<Response, QueryError> {
    let body = store
        .stats()
        .ok_or_else(|| QueryError::NotFound("stats report not generated; run stats".into()))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], body.to_vec()).into_response())
}

async fn meta(State(store): State<Arc<Store>>) -> Response {
    Json(store.meta()).into_response()
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/api/segments", get(segments))
        .route("/api/segments/{id}", get(segment))
        .route("/api/stats", get(stats))
        .route("/api/meta", get(meta))
        .with_state(store)
}

/// Binds and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, store: Store) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("serving {} segments on http://{}", store.explanations().len(), listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
