use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use affectline_core::corpus::Task;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::service::{default_batch_size, ApiError, ApiResult, Service, SCHEMA_VERSION};

type Shared = State<Arc<Service>>;

fn envelope(status: StatusCode, mut body: Value) -> Response {
    if let Value::Object(map) = &mut body {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    (status, Json(body)).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(e) = &self {
            tracing::error!(error = %e, "request failed");
        }
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        envelope(status, json!({ "error": { "code": self.code(), "message": self.to_string() } }))
    }
}

fn reply(r: ApiResult<Value>) -> Response {
    match r {
        Ok(v) => envelope(StatusCode::OK, v),
        Err(e) => e.into_response(),
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

/// Runs blocking service work off the async executor.
async fn blocking(svc: Arc<Service>, f: impl FnOnce(&Service) -> ApiResult<Value> + Send + 'static) -> Response {
    match tokio::task::spawn_blocking(move || f(&svc)).await {
        Ok(r) => reply(r),
        Err(e) => envelope(
            StatusCode::INTERNAL_SERVER_ERROR,
            json!({ "error": { "code": "internal", "message": e.to_string() } }),
        ),
    }
}

async fn list_rounds(State(svc): Shared, headers: HeaderMap) -> Response {
    if let Err(e) = svc.annotator(bearer(&headers)) {
        return e.into_response();
    }
    blocking(svc, |s| Ok(s.rounds())).await
}

async fn advance_rounds(State(svc): Shared, headers: HeaderMap) -> Response {
    if let Err(e) = svc.annotator(bearer(&headers)) {
        return e.into_response();
    }
    blocking(svc, Service::advance).await
}

async fn next_batch(State(svc): Shared, headers: HeaderMap, Query(q): Query<HashMap<String, String>>) -> Response {
    let who = match svc.annotator(bearer(&headers)) {
        Ok(w) => w,
        Err(e) => return e.into_response(),
    };
    let Some(task) = q.get("task").and_then(|t| Task::from_id(t)) else {
        return ApiError::Invalid("task must be relevance, emotion or trigger".into()).into_response();
    };
    let size = match q.get("size").map(|s| s.parse::<usize>()) {
        None => default_batch_size(task),
        Some(Ok(n)) => n,
        Some(Err(_)) => return ApiError::Invalid("size must be a positive integer".into()).into_response(),
    };
    blocking(svc, move |s| s.next_batch(&who, task, size)).await
}

async fn submit_labels(State(svc): Shared, headers: HeaderMap, Path(id): Path<String>, body: Bytes) -> Response {
    let who = match svc.annotator(bearer(&headers)) {
        Ok(w) => w,
        Err(e) => return e.into_response(),
    };
    blocking(svc, move |s| s.submit(&who, &id, &body)).await
}

async fn list_topics(State(svc): Shared, headers: HeaderMap, Query(q): Query<HashMap<String, String>>) -> Response {
    if let Err(e) = svc.annotator(bearer(&headers)) {
        return e.into_response();
    }
    let Some(emotion) = q.get("emotion").cloned() else {
        return ApiError::Invalid("emotion query parameter is required".into()).into_response();
    };
    blocking(svc, move |s| s.list_topics(&emotion)).await
}

async fn set_topic_status(
    State(svc): Shared,
    headers: HeaderMap,
    Path((emotion, k)): Path<(String, String)>,
    body: Bytes,
) -> Response {
    if let Err(e) = svc.annotator(bearer(&headers)) {
        return e.into_response();
    }
    blocking(svc, move |s| s.set_topic_status(&emotion, &k, &body)).await
}

async fn fallback() -> Response {
    ApiError::NotFound("no such route".into()).into_response()
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/rounds", get(list_rounds))
        .route("/rounds/advance", post(advance_rounds))
        .route("/batches/next", get(next_batch))
        .route("/batches/{id}/labels", post(submit_labels))
        .route("/topics", get(list_topics))
        .route("/topics/{emotion}/{k}/status", post(set_topic_status))
        .fallback(fallback)
        .with_state(svc)
}

pub async fn serve(svc: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    serve_until(svc, addr, std::future::pending()).await
}

/// Like [`serve`], returning once `shutdown` resolves and in-flight
/// requests finish.
pub async fn serve_until(
    svc: Arc<Service>,
    addr: SocketAddr,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "annotation service listening");
    axum::serve(listener, router(svc)).with_graceful_shutdown(shutdown).await
}
