//! HTTP surface over a shared memory store.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /v1/ingest` | utterance JSON Lines, one session | integration report |
//! | `POST /v1/query` | `{"question": "..."}` | `{"answer", "evidence", "stats"}` |
//! | `GET /v1/graph` | | graph snapshot |
//! | `GET /v1/stats` | | aggregate of every query served so far |
//!
//! Searches and ingestion are blocking and run on the blocking pool. Queries
//! share a read lock, ingestion takes the write lock.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::construction::{ingest_session, read_sessions_jsonl, ConstructionError, IntegrationReport};
use crate::harness::{aggregate_stats, AggregateStats};
use crate::llm::{ChatProvider, Gateway};
use crate::memory::{Embedder, MemoryStore};
use crate::search::{run_search, EvidenceItem, SearchError, SearchStats};

pub struct AppState {
    store: RwLock<MemoryStore>,
    provider: Arc<dyn ChatProvider>,
    embedder: Arc<dyn Embedder>,
    served: Mutex<Vec<SearchStats>>,
    /// Written after every successful ingestion when set.
    persist_to: Option<PathBuf>,
}

impl AppState {
    pub fn new(store: MemoryStore, provider: Arc<dyn ChatProvider>, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            store: RwLock::new(store),
            provider,
            embedder,
            served: Mutex::new(Vec::new()),
            persist_to: None,
        }
    }

    pub fn persist_to(mut self, path: impl Into<PathBuf>) -> Self {
        self.persist_to = Some(path.into());
        self
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        self.store.read().expect("store lock poisoned").snapshot_bytes()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRequest {
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub answer: String,
    pub evidence: Vec<EvidenceItem>,
    pub stats: SearchStats,
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        Self {
            status,
            message: message.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        let status = match e {
            SearchError::EmptyQuery => StatusCode::BAD_REQUEST,
            SearchError::EmptyStore => StatusCode::CONFLICT,
            SearchError::Planning(_) | SearchError::Respond(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e)
    }
}

impl From<ConstructionError> for ApiError {
    fn from(e: ConstructionError) -> Self {
        let status = match e {
            ConstructionError::Input { .. } | ConstructionError::EmptyBatch | ConstructionError::MixedSessions(..) => {
                StatusCode::BAD_REQUEST
            }
            ConstructionError::BatchFailed { .. } => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e)
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?
}

async fn query(
    State(app): State<Arc<AppState>>,
    body: Result<Json<QueryRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.body_text()))?;
    let reply = blocking(move || {
        let store = app.store.read().expect("store lock poisoned");
        let gateway = Gateway::new(app.provider.as_ref(), &store.config);
        let result = run_search(&req.question, &store, &gateway, app.embedder.as_ref(), &store.config)?;
        app.served.lock().expect("stats lock poisoned").push(result.stats.clone());
        Ok(QueryResponse {
            answer: result.answer,
            evidence: result.evidence,
            stats: result.stats,
        })
    })
    .await?;
    Ok(Json(reply))
}

async fn ingest(State(app): State<Arc<AppState>>, body: String) -> Result<Json<IntegrationReport>, ApiError> {
    let report = blocking(move || {
        let mut sessions = read_sessions_jsonl(&body)?;
        if sessions.len() != 1 {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("expected exactly one session, got {}", sessions.len()),
            ));
        }
        let batch = sessions.pop().expect("one session");
        let mut store = app.store.write().expect("store lock poisoned");
        let config = store.config.clone();
        let gateway = Gateway::new(app.provider.as_ref(), &config);
        let report = ingest_session(&mut store, &batch, &gateway, app.embedder.as_ref())?;
        if let Some(path) = &app.persist_to {
            store
                .save(path)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
        }
        Ok(report)
    })
    .await?;
    Ok(Json(report))
}

async fn graph(State(app): State<Arc<AppState>>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], app.snapshot_bytes()).into_response()
}

async fn stats(State(app): State<Arc<AppState>>) -> Json<AggregateStats> {
    let served = app.served.lock().expect("stats lock poisoned");
    Json(aggregate_stats(&served))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/ingest", post(ingest))
        .route("/v1/query", post(query))
        .route("/v1/graph", get(graph))
        .route("/v1/stats", get(stats))
        .with_state(state)
}

/// Serves until the listener fails or ctrl-c is received.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
