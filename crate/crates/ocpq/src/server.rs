//! JSON-over-HTTP facade used by the query editor.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | POST | `/api/log?strict=` | OCEL 2.0 JSON | log metadata with `logId` |
//! | GET | `/api/log/{logId}/info` | | log metadata |
//! | POST | `/api/query/evaluate` | `{logId, tree}` | `{resultId, logId, perNode}` |
//! | GET | `/api/result/{resultId}/node/{nodeId}` | `offset`, `limit`, `includeBasicOnly` | one page of rows |
//! | GET | `/api/result/{resultId}/node/{nodeId}/export.csv` | `includeBasicOnly`, `includeLabels` | CSV |
//!
//! Everything else is served from the static directory, if configured.

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use ocpq_core::{
    build_index, evaluate_tree, EngineError, EvalOptions, EvaluationResult, IndexedLog, Oced,
    QueryTree,
};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::export::{export_csv, summary_json, CsvOptions, NodeTable};
use crate::ocel::{import_ocel2_json, log_info, ImportError, LogInfo};
use crate::query_json::{query_from_value, serialize_query, QueryError};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub max_logs: NonZeroUsize,
    pub max_results: NonZeroUsize,
    /// Request bodies above this size are rejected with 413.
    pub max_body_bytes: usize,
    pub eval_timeout: Duration,
    pub eval: EvalOptions,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            max_logs: NonZeroUsize::new(8).unwrap(),
            max_results: NonZeroUsize::new(64).unwrap(),
            max_body_bytes: 1 << 30,
            eval_timeout: Duration::from_secs(120),
            eval: EvalOptions::default(),
            static_dir: None,
        }
    }
}

struct LoadedLog {
    idx: IndexedLog,
    info: LogInfo,
    warnings: Vec<Value>,
}

struct StoredResult {
    log: Arc<LoadedLog>,
    tree: QueryTree,
    result: EvaluationResult,
    body: Bytes,
}

/// Registry of loaded logs and evaluation results, keyed by content hash.
pub struct AppState {
    cfg: ServerConfig,
    logs: Mutex<LruCache<String, Arc<LoadedLog>>>,
    results: Mutex<LruCache<String, Arc<StoredResult>>>,
}

impl AppState {
    pub fn new(cfg: ServerConfig) -> Arc<Self> {
        Arc::new(AppState {
            logs: Mutex::new(LruCache::new(cfg.max_logs)),
            results: Mutex::new(LruCache::new(cfg.max_results)),
            cfg,
        })
    }

    fn log(&self, id: &str) -> Result<Arc<LoadedLog>, ApiError> {
        self.logs
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("log", id))
    }

    fn result(&self, id: &str) -> Result<Arc<StoredResult>, ApiError> {
        self.results
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("result", id))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({"error": error, "message": message.into()}),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "NotFound",
            format!("unknown {what} `{id}`"),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<ImportError> for ApiError {
    fn from(e: ImportError) -> Self {
        match e {
            ImportError::Parse(m) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ParseError", m)
            }
            ImportError::Invalid(findings) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({
                    "error": "InvalidLog",
                    "message": ImportError::Invalid(findings.clone()).to_string(),
                    "findings": findings.iter().map(finding_json).collect::<Vec<_>>(),
                }),
            },
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Parse(m) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "ParseError", m)
            }
            QueryError::Invalid(findings) => ApiError {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: json!({
                    "error": "InvalidTree",
                    "findings": findings
                        .iter()
                        .map(|f| json!({"code": f.code(), "location": f.location(), "message": f.to_string()}))
                        .collect::<Vec<_>>(),
                }),
            },
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::ResultTooLarge { ref node, limit } => ApiError {
                status: StatusCode::CONFLICT,
                body: json!({"error": "ResultTooLarge", "node": node, "limit": limit, "message": e.to_string()}),
            },
            EngineError::InvalidTree(f) => QueryError::Invalid(f).into(),
            other => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "EngineError",
                other.to_string(),
            ),
        }
    }
}

fn finding_json(f: &ocpq_core::Finding) -> Value {
    json!({"code": f.code.as_str(), "refId": f.ref_id, "message": f.message})
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))
}

fn log_body(id: &str, log: &LoadedLog) -> Value {
    let mut v = serde_json::to_value(&log.info).expect("log info serializes");
    v["logId"] = Value::from(id);
    v["warnings"] = Value::from(log.warnings.clone());
    v
}

#[derive(Deserialize)]
struct LogParams {
    #[serde(default)]
    strict: bool,
}

async fn post_log(
    State(state): State<Arc<AppState>>,
    Query(p): Query<LogParams>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let id = sha256_hex(&[&body]);
    if let Some(log) = state.logs.lock().unwrap().get(&id).cloned() {
        return Ok(Json(log_body(&id, &log)));
    }
    let loaded = blocking(move || -> Result<LoadedLog, ApiError> {
        let imported = import_ocel2_json(&body, p.strict)?;
        let log: Oced = imported.log;
        let idx = build_index(&log).map_err(|e| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "InvalidLog",
                e.to_string(),
            )
        })?;
        Ok(LoadedLog {
            info: log_info(&log),
            warnings: imported.warnings.iter().map(finding_json).collect(),
            idx,
        })
    })
    .await??;
    let loaded = Arc::new(loaded);
    log::info!(
        "loaded log {id}: {} events, {} objects",
        loaded.info.counts.events,
        loaded.info.counts.objects
    );
    state.logs.lock().unwrap().put(id.clone(), loaded.clone());
    Ok(Json(log_body(&id, &loaded)))
}

async fn get_log_info(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let log = state.log(&id)?;
    Ok(Json(log_body(&id, &log)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct EvaluateRequest {
    log_id: String,
    tree: Value,
}

async fn evaluate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: EvaluateRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "ParseError",
            e.to_string(),
        )
    })?;
    let tree = query_from_value(req.tree)?;
    let log = state.log(&req.log_id)?;
    let result_id = sha256_hex(&[req.log_id.as_bytes(), b"\n", &serialize_query(&tree)]);
    if let Ok(stored) = state.result(&result_id) {
        return Ok(json_bytes(stored.body.clone()));
    }

    let opts = state.cfg.eval;
    let job = {
        let log = log.clone();
        blocking(move || evaluate_tree(&tree, &log.idx, opts).map(|r| (tree, r)))
    };
    let (tree, result) = tokio::time::timeout(state.cfg.eval_timeout, job)
        .await
        .map_err(|_| {
            ApiError::new(
                StatusCode::GATEWAY_TIMEOUT,
                "Timeout",
                format!("evaluation exceeded {:?}", state.cfg.eval_timeout),
            )
        })??
        .map_err(ApiError::from)?;
    if let Some(t) = result.wall_time {
        log::info!("evaluated {result_id} in {t:?}");
    }

    let body = json!({
        "resultId": result_id,
        "logId": req.log_id,
        "perNode": summary_json(&result),
    });
    let body = Bytes::from(serde_json::to_vec(&body).expect("summary serializes"));
    let stored = Arc::new(StoredResult {
        log,
        tree,
        result,
        body: body.clone(),
    });
    state.results.lock().unwrap().put(result_id, stored);
    Ok(json_bytes(body))
}

fn json_bytes(body: Bytes) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PageParams {
    #[serde(default)]
    offset: usize,
    limit: Option<usize>,
    #[serde(default)]
    include_basic_only: bool,
}

pub const DEFAULT_PAGE: usize = 100;
pub const MAX_PAGE: usize = 10_000;

fn table<'a>(stored: &'a StoredResult, node_id: &str) -> Result<NodeTable<'a>, ApiError> {
    NodeTable::new(&stored.result, &stored.tree, &stored.log.idx, node_id)
        .map_err(|_| ApiError::not_found("node", node_id))
}

async fn node_page(
    State(state): State<Arc<AppState>>,
    Path((result_id, node_id)): Path<(String, String)>,
    Query(p): Query<PageParams>,
) -> Result<Json<Value>, ApiError> {
    let stored = state.result(&result_id)?;
    let table = table(&stored, &node_id)?;
    let visible = table.visible_rows(p.include_basic_only);
    let limit = p.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let rows: Vec<Value> = visible
        .iter()
        .skip(p.offset)
        .take(limit)
        .map(|&i| table.row_json(i))
        .collect();
    Ok(Json(json!({
        "nodeId": node_id,
        "total": visible.len(),
        "offset": p.offset,
        "limit": limit,
        "columns": {
            "vars": table.var_names().collect::<Vec<_>>(),
            "labels": table.label_names(),
        },
        "rows": rows,
    })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CsvParams {
    #[serde(default)]
    include_basic_only: bool,
    include_labels: Option<bool>,
}

async fn node_csv(
    State(state): State<Arc<AppState>>,
    Path((result_id, node_id)): Path<(String, String)>,
    Query(p): Query<CsvParams>,
) -> Result<Response, ApiError> {
    let stored = state.result(&result_id)?;
    let opts = CsvOptions {
        include_basic_only: p.include_basic_only,
        include_labels: p.include_labels.unwrap_or(true),
    };
    let csv = export_csv(
        &stored.result,
        &stored.tree,
        &stored.log.idx,
        &node_id,
        opts,
    )
    .map_err(|_| ApiError::not_found("node", &node_id))?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{node_id}.csv\""),
            ),
        ],
        csv,
    )
        .into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/api/log", post(post_log))
        .route("/api/log/{log_id}/info", get(get_log_info))
        .route("/api/query/evaluate", post(evaluate))
        .route("/api/result/{result_id}/node/{node_id}", get(node_page))
        .route(
            "/api/result/{result_id}/node/{node_id}/export.csv",
            get(node_csv),
        );
    if let Some(dir) = &state.cfg.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(DefaultBodyLimit::max(state.cfg.max_body_bytes))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
