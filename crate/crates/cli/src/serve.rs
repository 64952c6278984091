//! HTTP endpoints for the browser runner.
//!
//! - `GET  /api/lists`: list ids with trial counts
//! - `GET  /api/lists/{id}`: one materialized list
//! - `POST /api/assign`: next list in round-robin order
//! - `POST /api/sessions/{session}/records`: TrialRecord JSONL upload
//! - `GET  /api/sessions/{session}/records`: what has been stored
//!
//! Uploads are idempotent: a record already stored for the session (same
//! subject, task and sentence) is counted as a duplicate and skipped.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dualtask_core::jsonl;
use dualtask_core::lists::{assign_list, ExperimentList};
use dualtask_core::{SentenceRef, Task, TrialRecord};
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;

type RecordKey = (String, Task, SentenceRef);

fn record_key(t: &TrialRecord) -> RecordKey {
    (t.subject_id.clone(), t.task, t.sentence_ref)
}

#[derive(Default)]
struct Session {
    loaded: bool,
    keys: BTreeSet<RecordKey>,
}

pub struct ServeState {
    lists: Vec<ExperimentList>,
    sessions_dir: PathBuf,
    counter: AtomicU64,
    sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<Session>>>>,
}

impl ServeState {
    pub fn new(lists: Vec<ExperimentList>, sessions_dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(sessions_dir)?;
        Ok(ServeState {
            lists,
            sessions_dir: sessions_dir.to_path_buf(),
            counter: AtomicU64::new(0),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn session(&self, id: &str) -> Arc<tokio::sync::Mutex<Session>> {
        let mut map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        map.entry(id.to_string()).or_default().clone()
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.sessions_dir.join(format!("{id}.jsonl"))
    }
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct ListSummary {
    pub list_id: u32,
    pub trials: usize,
    pub practice: usize,
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct UploadAck {
    pub session: String,
    pub accepted: usize,
    pub duplicates: usize,
    pub total: usize,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

async fn list_index(State(s): State<Arc<ServeState>>) -> Json<Vec<ListSummary>> {
    Json(
        s.lists
            .iter()
            .map(|l| ListSummary {
                list_id: l.list_id,
                trials: l.trials.len(),
                practice: l.practice.len(),
            })
            .collect(),
    )
}

async fn list_one(State(s): State<Arc<ServeState>>, UrlPath(id): UrlPath<u32>) -> Response {
    match s.lists.iter().find(|l| l.list_id == id) {
        Some(l) => Json(l).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no list {id}")),
    }
}

async fn assign(State(s): State<Arc<ServeState>>) -> Response {
    if s.lists.is_empty() {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no lists loaded");
    }
    let n = s.counter.fetch_add(1, Ordering::SeqCst);
    let list_id = assign_list(n, s.lists.len() as u32);
    Json(json!({ "participant": n, "list_id": list_id })).into_response()
}

async fn upload(State(s): State<Arc<ServeState>>, UrlPath(session): UrlPath<String>, body: String) -> Response {
    if !valid_session_id(&session) {
        return error(StatusCode::BAD_REQUEST, "session id must be 1-64 characters of [A-Za-z0-9_-]");
    }
    let records: Vec<TrialRecord> = match jsonl::from_str(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let lock = s.session(&session);
    let mut state = lock.lock().await;
    let path = s.session_path(&session);
    if !state.loaded {
        if path.exists() {
            match jsonl::read::<TrialRecord>(&path) {
                Ok(existing) => state.keys.extend(existing.iter().map(record_key)),
                Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            }
        }
        state.loaded = true;
    }
    let mut fresh = Vec::new();
    let mut duplicates = 0;
    for r in records {
        if state.keys.insert(record_key(&r)) {
            fresh.push(r);
        } else {
            duplicates += 1;
        }
    }
    if !fresh.is_empty() {
        let text = jsonl::to_string(&fresh);
        let written = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| f.write_all(text.as_bytes()));
        if let Err(e) = written {
            for r in &fresh {
                state.keys.remove(&record_key(r));
            }
            return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
        }
    }
    Json(UploadAck {
        session,
        accepted: fresh.len(),
        duplicates,
        total: state.keys.len(),
    })
    .into_response()
}

async fn download(State(s): State<Arc<ServeState>>, UrlPath(session): UrlPath<String>) -> Response {
    if !valid_session_id(&session) {
        return error(StatusCode::BAD_REQUEST, "bad session id");
    }
    let lock = s.session(&session);
    let _guard = lock.lock().await;
    match std::fs::read_to_string(s.session_path(&session)) {
        Ok(text) => ([("content-type", "application/x-ndjson")], text).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, format!("no records for {session}")),
    }
}

pub fn router(state: Arc<ServeState>, static_dir: Option<&Path>) -> Router {
    let app = Router::new()
        .route("/api/lists", get(list_index))
        .route("/api/lists/{id}", get(list_one))
        .route("/api/assign", post(assign))
        .route("/api/sessions/{session}/records", post(upload).get(download))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Runs the server until the process is stopped.
pub fn serve(addr: SocketAddr, state: ServeState, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(Arc::new(state), static_dir.as_deref())).await
    })
}

/// Every record stored by the server, in session-file order.
pub fn load_sessions(dir: &Path) -> Result<Vec<TrialRecord>, jsonl::JsonlError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(jsonl::read::<TrialRecord>(&f)?);
    }
    Ok(out)
}
