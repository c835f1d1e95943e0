use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use flow_core::engine::{EngineError, FinalStatus, InstanceSummary};
use flow_core::model::canonicalize;
use flow_core::protocol::{AppSummary, IterationResponse, Reply};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};
use tokio::net::TcpListener;

use crate::error::ApiError;
use crate::Server;

/// Upper bound on how long a version poll may hold a connection.
pub const MAX_POLL_MS: u64 = 30_000;

type Shared = State<Arc<Server>>;

pub fn router(server: Arc<Server>) -> Router {
    Router::new()
        .route("/apps/{app_id}", get(app_summary).put(update_app))
        .route("/apps/{app_id}/version", get(app_version))
        .route("/apps/{app_id}/launchers/{launcher_id}/launch", post(launch))
        .route("/instances", get(list_instances))
        .route("/instances/{id}", get(instance))
        .route("/instances/{id}/response", post(respond))
        .route("/instances/{id}/request", get(pending_request))
        .route("/instances/{id}/log", get(instance_log))
        .route("/instances/{id}/cancel", post(cancel))
        .with_state(server)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    server: Arc<Server>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(server))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Engine calls may touch disk or call external services; keep them off
/// the async workers.
async fn blocking<T, F>(server: Arc<Server>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&Server) -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&server))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

/// Bodies go out with sorted keys, the same text the engine logs.
fn wire<T: Serialize>(value: &T) -> Json<JsonValue> {
    Json(canonicalize(
        &serde_json::to_value(value).expect("API bodies serialize"),
    ))
}

fn instance_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "UnknownInstance", format!("no instance `{raw}`")))
}

async fn app_summary(State(server): Shared, Path(app_id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let models = server.coordinator().models();
    let app = models.app(&app_id).ok_or(EngineError::UnknownApp(app_id))?;
    Ok(wire(&AppSummary::from(app)))
}

async fn update_app(
    State(server): Shared,
    Path(app_id): Path<String>,
    body: String,
) -> Result<Json<JsonValue>, ApiError> {
    let version = blocking(server, move |s| s.update_app(&app_id, &body)).await?;
    Ok(Json(json!({ "version": version })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct VersionQuery {
    since: Option<u64>,
    timeout_ms: Option<u64>,
}

async fn app_version(
    State(server): Shared,
    Path(app_id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> Result<Json<JsonValue>, ApiError> {
    let mut rx = server.watch_version(&app_id).ok_or(EngineError::UnknownApp(app_id))?;
    let since = q.since.unwrap_or(0);
    let wait = Duration::from_millis(q.timeout_ms.unwrap_or(MAX_POLL_MS).min(MAX_POLL_MS));
    // a timeout (or a closed channel) just reports the current version
    let _ = tokio::time::timeout(wait, rx.wait_for(|v| *v > since)).await;
    let version = *rx.borrow();
    Ok(Json(json!({ "version": version })))
}

async fn launch(
    State(server): Shared,
    Path((app_id, launcher_id)): Path<(String, String)>,
) -> Result<Json<JsonValue>, ApiError> {
    let (id, outcome) = blocking(server, move |s| Ok(s.coordinator().launch(&app_id, &launcher_id)?)).await?;
    Ok(wire(&Reply::from_outcome(Some(id), outcome)))
}

async fn respond(State(server): Shared, Path(id): Path<String>, body: String) -> Result<Json<JsonValue>, ApiError> {
    let id = instance_id(&id)?;
    let response: IterationResponse = serde_json::from_str(&body).map_err(|e| ApiError::invalid_body(e.to_string()))?;
    let outcome = blocking(server, move |s| Ok(s.coordinator().respond(&response, id)?)).await?;
    Ok(wire(&Reply::from_outcome(None, outcome)))
}

async fn instance(State(server): Shared, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let id = instance_id(&id)?;
    let instance = blocking(server, move |s| Ok(s.coordinator().instance(id)?)).await?;
    Ok(wire(&InstanceSummary::from(&instance)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ListQuery {
    app_id: Option<String>,
}

async fn list_instances(State(server): Shared, Query(q): Query<ListQuery>) -> Result<Json<JsonValue>, ApiError> {
    let all = blocking(server, move |s| Ok(s.coordinator().summaries(q.app_id.as_deref()))).await?;
    Ok(wire(&all))
}

async fn pending_request(State(server): Shared, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let id = instance_id(&id)?;
    let request = blocking(server, move |s| Ok(s.coordinator().pending_request(id)?)).await?;
    Ok(wire(&request.ok_or(EngineError::StaleInstance(id))?))
}

async fn instance_log(State(server): Shared, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let id = instance_id(&id)?;
    let instance = blocking(server, move |s| Ok(s.coordinator().instance(id)?)).await?;
    Ok(wire(&instance.log))
}

async fn cancel(State(server): Shared, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let id = instance_id(&id)?;
    let status = blocking(server, move |s| Ok(s.coordinator().cancel(id)?)).await?;
    debug_assert_eq!(status, FinalStatus::Cancelled);
    Ok(Json(json!({ "status": status.state() })))
}
