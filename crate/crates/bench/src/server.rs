//! HTTP and WebSocket front end.
//!
//! Each session sits behind its own mutex. Mutating requests run on the
//! blocking pool and fail fast with `busy` if another operation holds the
//! session. Log readers and stream subscribers never take that lock: every
//! entry is mirrored into a per-session feed as it is written.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError, RwLock, TryLockError};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::config::{config_from_value, SchemaError};
use crate::error::BenchError;
use crate::log::{LogEntry, StreamEvent};
use crate::request::{AutotuneRequest, BurstRequest, Command, MapRequest, ScanRequest, WaitRequest};
use crate::session::{CommandOutput, Session, SessionState};

const STREAM_CAPACITY: usize = 1024;

/// Log mirror readable while the session is busy.
pub struct Feed {
    log: Mutex<Vec<LogEntry>>,
    tx: broadcast::Sender<LogEntry>,
}

impl Feed {
    fn entries_from(&self, from: u64) -> Vec<LogEntry> {
        let log = lock(&self.log);
        log.get(from as usize..).map(<[LogEntry]>::to_vec).unwrap_or_default()
    }
}

pub struct Handle {
    pub session: Mutex<Session>,
    feed: Arc<Feed>,
    /// State after the most recent operation.
    state: Mutex<SessionState>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<BTreeMap<String, Arc<Handle>>>,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn handle(&self, id: &str) -> Result<Arc<Handle>, BenchError> {
        let map = self.sessions.read().unwrap_or_else(PoisonError::into_inner);
        map.get(id).cloned().ok_or_else(|| BenchError::NotFound(format!("session {id:?}")))
    }

    /// Registers a session and returns its id.
    pub fn insert(&self, mut session: Session) -> String {
        let (tx, _) = broadcast::channel(STREAM_CAPACITY);
        let feed = Arc::new(Feed { log: Mutex::new(session.log().to_vec()), tx });
        let sink = Arc::clone(&feed);
        session.set_observer(move |e| {
            let mut log = lock(&sink.log);
            log.push(e.clone());
            let _ = sink.tx.send(e.clone());
        });
        let state = session.state();
        let handle = Arc::new(Handle { session: Mutex::new(session), feed, state: Mutex::new(state) });
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed) + 1);
        self.sessions.write().unwrap_or_else(PoisonError::into_inner).insert(id.clone(), handle);
        id
    }
}

pub struct ApiError(pub BenchError);

impl From<BenchError> for ApiError {
    fn from(e: BenchError) -> Self {
        Self(e)
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.0.body())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, BenchError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let pointer = e.path().iter().map(|s| format!("/{s}")).collect::<String>();
        let pointer = if pointer == "/." { String::new() } else { pointer };
        BenchError::Schema(vec![SchemaError { pointer, message: e.inner().to_string() }])
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub busy: bool,
    pub state: SessionState,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/config", get(get_config))
        .route("/sessions/{id}/scan", post(scan))
        .route("/sessions/{id}/burst", post(burst))
        .route("/sessions/{id}/wait", post(wait))
        .route("/sessions/{id}/autotune", post(autotune))
        .route("/sessions/{id}/map", get(map))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

pub async fn serve(port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    axum::serve(listener, router(AppState::new())).await
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let value: serde_json::Value = parse(&body)?;
    let config = config_from_value(value).map_err(BenchError::Schema)?;
    let session = tokio::task::spawn_blocking(move || Session::new(config))
        .await
        .map_err(|e| BenchError::Io(e.to_string()))??;
    let state = session.state();
    let id = app.insert(session);
    Ok((StatusCode::CREATED, Json(SessionView { id, busy: false, state })))
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(app.sessions.read().unwrap_or_else(PoisonError::into_inner).keys().cloned().collect())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let h = app.handle(&id)?;
    let view = match h.session.try_lock() {
        Ok(s) => SessionView { id, busy: false, state: s.state() },
        Err(TryLockError::Poisoned(p)) => SessionView { id, busy: false, state: p.into_inner().state() },
        Err(TryLockError::WouldBlock) => SessionView { id, busy: true, state: lock(&h.state).clone() },
    };
    Ok(Json(view))
}

async fn get_config(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let h = app.handle(&id)?;
    let s = h.session.try_lock().map_err(|_| BenchError::Busy)?;
    Ok(Json(s.config().clone()).into_response())
}

async fn run(app: Arc<AppState>, id: String, cmd: Command) -> ApiResult<Json<CommandOutput>> {
    let h = app.handle(&id)?;
    let out = tokio::task::spawn_blocking(move || {
        let mut s = match h.session.try_lock() {
            Ok(s) => s,
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
            Err(TryLockError::WouldBlock) => return Err(BenchError::Busy),
        };
        let out = s.execute(&cmd);
        *lock(&h.state) = s.state();
        out
    })
    .await
    .map_err(|e| BenchError::Io(e.to_string()))??;
    Ok(Json(out))
}

async fn scan(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<CommandOutput>> {
    let req: ScanRequest = parse(&body)?;
    run(app, id, Command::Scan(req)).await
}

async fn burst(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<CommandOutput>> {
    let req: BurstRequest = parse(&body)?;
    run(app, id, Command::Burst(req)).await
}

async fn wait(State(app): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<CommandOutput>> {
    let req: WaitRequest = parse(&body)?;
    run(app, id, Command::Wait(req)).await
}

async fn autotune(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<CommandOutput>> {
    let req: AutotuneRequest = if body.is_empty() { AutotuneRequest::default() } else { parse(&body)? };
    run(app, id, Command::Autotune(req)).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapQuery {
    probe: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    step: f64,
    #[serde(default)]
    dwell: Option<f64>,
    #[serde(default)]
    format: Option<String>,
}

async fn map(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<MapQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| {
        let text = e.body_text();
        let field = ["probe", "x0", "x1", "y0", "y1", "step", "dwell", "format"]
            .into_iter()
            .find(|f| text.contains(&format!("`{f}`")) || text.contains(&format!("field {f}")));
        BenchError::Schema(vec![SchemaError {
            pointer: field.map(|f| format!("/{f}")).unwrap_or_default(),
            message: text,
        }])
    })?;
    let format = q.format.as_deref().unwrap_or("json").to_owned();
    if !matches!(format.as_str(), "json" | "pgm" | "csv") {
        return Err(BenchError::invalid("/format", "format must be json, pgm or csv").into());
    }
    let req = MapRequest {
        probe: q.probe,
        x: [q.x0, q.x1],
        y: [q.y0, q.y1],
        step_um: q.step,
        dwell: q.dwell.unwrap_or(0.1),
        probe_power: 1.0,
    };
    let Json(out) = run(app, id, Command::Map(req)).await?;
    let CommandOutput::Map(m) = out else {
        return Err(BenchError::Io("unexpected output".into()).into());
    };
    let mut buf = Vec::new();
    let content_type = match format.as_str() {
        "pgm" => {
            m.write_pgm(&mut buf)?;
            "image/x-portable-graymap"
        }
        "csv" => {
            m.write_csv(&mut buf)?;
            "text/csv"
        }
        _ => return Ok(Json(m).into_response()),
    };
    Ok(([(header::CONTENT_TYPE, content_type)], buf).into_response())
}

#[derive(Debug, Deserialize)]
struct FromQuery {
    #[serde(default)]
    from: u64,
}

async fn log(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<FromQuery>,
) -> ApiResult<Response> {
    let h = app.handle(&id)?;
    let mut buf = Vec::new();
    crate::log::write_jsonl(&h.feed.entries_from(q.from), &mut buf)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], buf).into_response())
}

async fn stream(
    ws: WebSocketUpgrade,
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<FromQuery>,
) -> ApiResult<Response> {
    let h = app.handle(&id)?;
    let feed = Arc::clone(&h.feed);
    Ok(ws.on_upgrade(move |socket| forward(socket, feed, q.from)))
}

async fn send(socket: &mut WebSocket, e: &LogEntry) -> bool {
    let text = serde_json::to_string(&StreamEvent::from(e)).unwrap_or_default();
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Backlog from `from`, then live entries, in sequence order without gaps.
async fn forward(mut socket: WebSocket, feed: Arc<Feed>, from: u64) {
    let (backlog, mut rx) = {
        let log = lock(&feed.log);
        let rx = feed.tx.subscribe();
        (log.get(from as usize..).map(<[LogEntry]>::to_vec).unwrap_or_default(), rx)
    };
    let mut next = from;
    for e in &backlog {
        if !send(&mut socket, e).await {
            return;
        }
        next = e.seq + 1;
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(e) if e.seq < next => {}
                Ok(e) => {
                    if !send(&mut socket, &e).await {
                        return;
                    }
                    next = e.seq + 1;
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    for e in feed.entries_from(next) {
                        if !send(&mut socket, &e).await {
                            return;
                        }
                        next = e.seq + 1;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
