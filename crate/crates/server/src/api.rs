//! HTTP/JSON routes over the [`Store`].

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use amigo_core::classify::{
    LATENCY_EXCEPTIONAL_MAX_MS, LATENCY_GOOD_MAX_MS, LATENCY_GOOD_MIN_MS, LATENCY_POOR_MIN_MS,
    SPEED_FAST_MIN_MBPS, SPEED_INDEX_FAST_MAX_S, SPEED_INDEX_SLOW_MIN_S, SPEED_SLOW_MAX_MBPS,
};
use amigo_core::{AckOutcome, DeviceStatus, ExperimentKind, MeasurementRecord, NewInstruction, GIB};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tower_http::cors::CorsLayer;

use crate::store::{stale_after, Rejected, Store, StoreError, SubmitOutcome};

#[derive(Clone)]
pub struct AppState {
    store: Arc<Mutex<Store>>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self {
            store: Arc::new(Mutex::new(store)),
        }
    }

    pub fn store(&self) -> MutexGuard<'_, Store> {
        self.store.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct ApiError(StoreError);

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self.0 {
            StoreError::Validation { .. } => (StatusCode::BAD_REQUEST, "validation"),
            StoreError::NotFound { .. } => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::State { .. } => (StatusCode::CONFLICT, "state"),
            StoreError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                (StatusCode::INTERNAL_SERVER_ERROR, "storage")
            }
        };
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct PendingAck {
    pub pending: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AckBody {
    pub outcome: AckOutcome,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Deserialize)]
struct RecordsQuery {
    kind: Option<String>,
    limit: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct InstructionsQuery {
    device_id: Option<String>,
}

async fn post_status(State(app): State<AppState>, Json(status): Json<DeviceStatus>) -> ApiResult<PendingAck> {
    let pending = app.store().ingest_status(status)?;
    Ok(Json(PendingAck { pending }))
}

async fn get_instructions(State(app): State<AppState>, Path(device): Path<String>) -> Response {
    match app.store().fetch_instructions(&device) {
        Ok(list) => Json(list).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn post_ack(
    State(app): State<AppState>,
    Path((device, id)): Path<(String, String)>,
    Json(body): Json<AckBody>,
) -> Response {
    match app.store().ack_instruction(&device, &id, body.outcome, body.detail) {
        Ok(i) => Json(i).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

/// Records are decoded one by one so a malformed entry only rejects itself.
async fn post_results(
    State(app): State<AppState>,
    Path(device): Path<String>,
    Json(body): Json<Vec<Value>>,
) -> ApiResult<SubmitOutcome> {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for v in body {
        let id = v.get("record_id").and_then(Value::as_str).unwrap_or("").to_string();
        match serde_json::from_value::<MeasurementRecord>(v) {
            Ok(r) => good.push(r),
            Err(e) => bad.push(Rejected {
                record_id: id,
                reason: format!("malformed record: {e}"),
            }),
        }
    }
    let mut out = app.store().submit_results(&device, good)?;
    out.rejected.extend(bad);
    Ok(Json(out))
}

async fn post_admin_instruction(State(app): State<AppState>, Json(new): Json<NewInstruction>) -> Response {
    match app.store().enqueue_instruction(new) {
        Ok(i) => (StatusCode::CREATED, Json(json!({ "id": i.id }))).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn list_admin_instructions(State(app): State<AppState>, Query(q): Query<InstructionsQuery>) -> Response {
    let store = app.store();
    let list: Vec<_> = match q.device_id {
        Some(d) => store.index().instructions_for(&d),
        None => store.index().all_instructions().cloned().collect(),
    };
    Json(list).into_response()
}

async fn get_admin_instruction(State(app): State<AppState>, Path(id): Path<String>) -> Response {
    match app.store().index().instruction(&id) {
        Some(i) => Json(i.clone()).into_response(),
        None => ApiError(StoreError::NotFound { what: "instruction", id }).into_response(),
    }
}

async fn get_fleet(State(app): State<AppState>) -> Response {
    Json(app.store().fleet_snapshot()).into_response()
}

async fn get_device_records(
    State(app): State<AppState>,
    Path(device): Path<String>,
    Query(q): Query<RecordsQuery>,
) -> Response {
    let kind = match q.kind.as_deref().filter(|k| !k.is_empty()) {
        None => None,
        Some(k) => match k.parse::<ExperimentKind>() {
            Ok(k) => Some(k),
            Err(_) => {
                return ApiError(StoreError::Validation {
                    field: "kind".into(),
                    reason: format!("unknown experiment kind {k:?}"),
                })
                .into_response()
            }
        },
    };
    Json(app.store().device_records(&device, kind, q.limit.unwrap_or(100))).into_response()
}

/// Classification thresholds and fleet badge limits, so clients can mirror
/// the server's rules without hard-coding them.
pub fn thresholds_document() -> Value {
    json!({
        "speed_mbps": { "slow_max": SPEED_SLOW_MAX_MBPS, "fast_min": SPEED_FAST_MIN_MBPS },
        "latency_ms": {
            "exceptional_max": LATENCY_EXCEPTIONAL_MAX_MS,
            "good_min": LATENCY_GOOD_MIN_MS,
            "good_max": LATENCY_GOOD_MAX_MS,
            "less_desirable_min": LATENCY_POOR_MIN_MS,
        },
        "speed_index_s": { "fast_max": SPEED_INDEX_FAST_MAX_S, "slow_min": SPEED_INDEX_SLOW_MIN_S },
        "battery_low_pct": 15,
        "daily_data_cap_bytes": 4 * GIB,
        "data_cap_near_bytes": 7 * GIB / 2,
        "stale_after_s": stale_after().num_seconds(),
        "status_interval_s": 300,
    })
}

async fn get_thresholds() -> Json<Value> {
    Json(thresholds_document())
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/api/v1/status", post(post_status))
        .route("/api/v1/instructions/{device_id}", get(get_instructions))
        .route("/api/v1/instructions/{device_id}/{id}/ack", post(post_ack))
        .route("/api/v1/results/{device_id}", post(post_results))
        .route(
            "/api/v1/admin/instructions",
            post(post_admin_instruction).get(list_admin_instructions),
        )
        .route("/api/v1/admin/instructions/{id}", get(get_admin_instruction))
        .route("/api/v1/admin/fleet", get(get_fleet))
        .route("/api/v1/admin/devices/{device_id}/records", get(get_device_records))
        .route("/api/v1/admin/thresholds", get(get_thresholds))
        .layer(CorsLayer::permissive())
        .with_state(app)
}

/// A server running on the current runtime.
pub struct ServerHandle {
    pub addr: SocketAddr,
    pub state: AppState,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    /// Stops accepting, finishes in-flight requests and returns.
    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.task.await.map_err(std::io::Error::other)?
    }
}

pub async fn spawn(listener: TcpListener, store: Store) -> std::io::Result<ServerHandle> {
    let addr = listener.local_addr()?;
    let state = AppState::new(store);
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(state.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    tracing::info!(%addr, "server listening");
    Ok(ServerHandle {
        addr,
        state,
        stop: Some(stop),
        task,
    })
}
