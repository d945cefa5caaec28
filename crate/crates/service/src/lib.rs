//! HTTP service for live sessions.
//!
//! Routes:
//! - `POST /sessions` creates a single-task or study-plan session
//! - `GET /sessions/{id}/next` returns the next stimulus, question or final score
//! - `POST /sessions/{id}/response` submits an answer to the pending question
//! - `GET /sessions/{id}/result` reports status and scores so far
//! - `GET /export?task=` streams stored transcript events as JSON lines
//! - `/ui` serves the participant UI bundle when a directory is configured

pub mod live;
pub mod plan;
pub mod store;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use memsim_core::metrics::{Embedder, TfEmbedder};
use memsim_core::stimulus::{builtin_pack, StimulusPack};
use memsim_core::transcript::{Clock, MonotonicClock};
use memsim_core::{TaskId, TaskParams};

use live::{LiveSession, SessionError, SessionSetup, Status};
use plan::{StudyPlan, DEFAULT_DEADLINE_MINUTES};
use store::TranscriptStore;

pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
    pub packs: BTreeMap<TaskId, StimulusPack>,
    /// Defaults for sessions that do not send their own parameters.
    pub params: TaskParams,
    pub clock: Arc<dyn Clock>,
    pub embedder: Arc<dyn Embedder>,
}

impl ServiceConfig {
    /// Bundled packs, practice blocks on, wall clock, offline embedder.
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        let packs = TaskId::ALL.iter().filter_map(|t| builtin_pack(*t).map(|p| (*t, p))).collect();
        ServiceConfig {
            data_dir: data_dir.into(),
            ui_dir: None,
            packs,
            params: TaskParams { include_practice: true, ..TaskParams::default() },
            clock: Arc::new(MonotonicClock::default()),
            embedder: Arc::new(TfEmbedder),
        }
    }
}

type Shared = Arc<Mutex<LiveSession>>;

struct AppState {
    sessions: Mutex<HashMap<String, Shared>>,
    packs: Arc<BTreeMap<TaskId, StimulusPack>>,
    params: TaskParams,
    clock: Arc<dyn Clock>,
    embedder: Arc<dyn Embedder>,
    store: TranscriptStore,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Gone(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Gone(_) => StatusCode::GONE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Gone => ApiError::Gone(e.to_string()),
            SessionError::WrongPhase => ApiError::Conflict(e.to_string()),
            SessionError::BadResponse(_) => ApiError::BadRequest(e.to_string()),
            SessionError::Task(t) => ApiError::Internal(t.to_string()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    #[serde(default)]
    tasks: Option<Vec<TaskId>>,
    #[serde(default = "default_deadline")]
    deadline_minutes: u64,
}

fn default_deadline() -> u64 {
    DEFAULT_DEADLINE_MINUTES
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    participant_id: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    task: Option<TaskId>,
    #[serde(default)]
    plan: Option<PlanRequest>,
    #[serde(default)]
    params: Option<TaskParams>,
}

#[derive(Debug, Deserialize)]
struct SubmitRequest {
    response: String,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    task: Option<String>,
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

pub fn router(config: ServiceConfig) -> Router {
    let state = Arc::new(AppState {
        sessions: Mutex::new(HashMap::new()),
        packs: Arc::new(config.packs),
        params: config.params,
        clock: config.clock,
        embedder: config.embedder,
        store: TranscriptStore::new(&config.data_dir),
    });
    let mut app = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_event))
        .route("/sessions/{id}/response", post(submit_response))
        .route("/sessions/{id}/result", get(session_result))
        .route("/export", get(export))
        .with_state(state);
    if let Some(dir) = config.ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config)).await
}

fn lookup(state: &AppState, id: &str) -> Result<Shared, ApiError> {
    state
        .sessions
        .lock()
        .expect("session table lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))
}

/// Runs `f` on the session under its lock off the async runtime, then
/// persists whatever events it produced.
async fn with_session<T, F>(state: Arc<AppState>, id: String, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut LiveSession) -> Result<T, SessionError> + Send + 'static,
{
    let session = lookup(&state, &id)?;
    tokio::task::spawn_blocking(move || {
        let mut s = session.lock().expect("session lock");
        let out = f(&mut s);
        let events = s.take_events();
        state.store.append(&id, &events).map_err(|e| ApiError::Internal(e.to_string()))?;
        out.map_err(ApiError::from)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))?
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    if req.participant_id.trim().is_empty() {
        return Err(ApiError::BadRequest("participant_id must not be empty".into()));
    }
    let (tasks, deadline_ms) = match (req.task, req.plan) {
        (Some(task), None) => (vec![task], None),
        (None, Some(plan)) => {
            let p = StudyPlan::randomized(&req.participant_id, req.seed, plan.tasks, plan.deadline_minutes)
                .map_err(|e| ApiError::BadRequest(e.to_string()))?;
            (p.tasks, Some(p.deadline_ms))
        }
        _ => return Err(ApiError::BadRequest("give exactly one of task or plan".into())),
    };
    let setup = SessionSetup {
        session_id: uuid::Uuid::new_v4().simple().to_string(),
        participant_id: req.participant_id.clone(),
        tasks: tasks.clone(),
        deadline_ms,
        seed: req.seed,
        params: req.params.unwrap_or_else(|| state.params.clone()),
    };
    let mut table = state.sessions.lock().expect("session table lock");
    for s in table.values() {
        let s = s.lock().expect("session lock");
        if s.participant_id() == req.participant_id && s.status() == Status::Active {
            return Err(ApiError::Conflict(format!("participant already has active session {}", s.id())));
        }
    }
    let mut session = LiveSession::new(setup, state.packs.clone(), state.clock.clone(), state.embedder.clone())
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let id = session.id().to_string();
    state
        .store
        .append(&id, &session.take_events())
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    table.insert(id.clone(), Arc::new(Mutex::new(session)));
    let body = json!({ "session_id": id, "tasks": tasks, "deadline_ms": deadline_ms });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn next_event(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = with_session(state, id, |s| s.next()).await?;
    Ok(Json(view).into_response())
}

async fn submit_response(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    // unknown sessions are a 404 even when the body is bad
    lookup(&state, &id)?;
    let req: SubmitRequest = parse_body(&body)?;
    let view = with_session(state, id, move |s| s.submit(&req.response)).await?;
    Ok(Json(view).into_response())
}

async fn session_result(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = with_session(state, id, |s| Ok(s.result())).await?;
    Ok(Json(view).into_response())
}

async fn export(State(state): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> Result<Response, ApiError> {
    let task = match q.task.as_deref() {
        None | Some("") => None,
        Some(t) => Some(t.parse::<TaskId>().map_err(|e| ApiError::BadRequest(e.to_string()))?),
    };
    let store = state.store.clone();
    let body = tokio::task::spawn_blocking(move || store.export(task))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}
