//! JSON HTTP API over sequential diagnosis sessions.
//!
//! Sessions live in memory under random ids. Each one sits behind its own
//! mutex, so concurrent answers to the same session are applied one at a
//! time, and a stale query token is rejected with 409. Sessions idle for
//! longer than the configured time to live are dropped on the next create.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mbdiag::dpi::{encode_circuit_to_dpi, parse_circuit_dsl, parse_dpi_json};
use mbdiag::sequential::{Answer, AnswerValue, SequentialError, SessionConfig, SessionState, StopReason};
use mbdiag::{ComponentId, Diagnosis, Dpi};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::registry::{builtin_problems, load_problem, Problem, ProblemInfo};

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(3600);

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    extra: BTreeMap<String, Problem>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    ttl: Duration,
}

struct Entry {
    problem_id: String,
    state: SessionState,
    touched: Instant,
}

impl AppState {
    /// Offers the built-in problems plus `extra`.
    pub fn new(extra: Vec<Problem>) -> Self {
        Self::with_ttl(extra, DEFAULT_SESSION_TTL)
    }

    pub fn with_ttl(extra: Vec<Problem>, ttl: Duration) -> Self {
        Self {
            inner: Arc::new(Inner {
                extra: extra.into_iter().map(|p| (p.id.clone(), p)).collect(),
                sessions: Mutex::new(HashMap::new()),
                ttl,
            }),
        }
    }

    pub fn session_count(&self) -> usize {
        self.sessions().len()
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, Arc<Mutex<Entry>>>> {
        self.inner.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}")))
    }

    fn reap_expired(&self) {
        let ttl = self.inner.ttl;
        self.sessions().retain(|_, e| match e.try_lock() {
            Ok(e) => e.touched.elapsed() < ttl,
            Err(_) => true,
        });
    }

    fn resolve(&self, id: &str) -> Result<Problem, ApiError> {
        if let Some(p) = self.inner.extra.get(id) {
            return Ok(p.clone());
        }
        // Never resolve file paths on behalf of remote clients.
        if id == "fulladder" || id.starts_with("random:") {
            return load_problem(id).map_err(|e| ApiError::unprocessable(e.to_string()));
        }
        Err(ApiError::unprocessable(format!("unknown problem {id:?}")))
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/api/problems", get(list_problems))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session).delete(delete_session))
        .route("/api/sessions/{id}/answer", post(answer_session))
        .route("/api/sessions/{id}/propose", post(propose_wire))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<SequentialError> for ApiError {
    fn from(e: SequentialError) -> Self {
        match e {
            SequentialError::Stopped
            | SequentialError::NoPendingQuery
            | SequentialError::AnswerContradictsAllDiagnoses => Self::conflict(e.to_string()),
            SequentialError::UnknownWire(_) | SequentialError::NoDiagnosis | SequentialError::TooFewDiagnoses(_) => {
                Self::unprocessable(e.to_string())
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

/// Bodies are parsed by hand so every malformed body maps to 422.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable(format!("invalid request body: {e}")))
}

/// Session view: the fields of a transcript record plus stop information.
/// `query`, `token`, `partition_sizes` and `scores` describe the pending
/// query; `answer` and `eliminated` describe the last answered one.
#[derive(Debug, Serialize)]
pub struct Snapshot {
    pub session_id: String,
    pub problem_id: String,
    pub step: usize,
    pub query: Option<String>,
    pub token: Option<String>,
    pub partition_sizes: Option<[usize; 3]>,
    pub scores: BTreeMap<String, f64>,
    pub answer: Option<AnswerValue>,
    pub eliminated: Vec<Vec<ComponentId>>,
    pub remaining: Vec<Vec<ComponentId>>,
    pub posteriors: Vec<f64>,
    pub stopped: bool,
    pub stop_reason: Option<StopReason>,
    pub final_diagnoses: Vec<Diagnosis>,
    pub config: SessionConfig,
}

fn snapshot(id: &str, e: &Entry) -> Snapshot {
    let s = &e.state;
    let q = s.current_query();
    let last = s.records().last();
    Snapshot {
        session_id: id.to_string(),
        problem_id: e.problem_id.clone(),
        step: s.queries_answered(),
        query: q.map(|q| q.prop.to_string()),
        token: s.query_token(),
        partition_sizes: q.map(|q| q.partition_sizes()),
        scores: q
            .map(|q| q.scores.iter().map(|(h, v)| (h.to_string(), *v)).collect())
            .unwrap_or_default(),
        answer: last.map(|r| r.answer),
        eliminated: last.map(|r| r.eliminated.clone()).unwrap_or_default(),
        remaining: s.leading().iter().map(|d| d.comps.clone()).collect(),
        posteriors: s.posteriors(),
        stopped: s.is_stopped(),
        stop_reason: s.stop_reason(),
        final_diagnoses: if s.is_stopped() { s.final_diagnoses() } else { Vec::new() },
        config: s.config().clone(),
    }
}

async fn list_problems(State(app): State<AppState>) -> Json<Vec<ProblemInfo>> {
    let mut out = builtin_problems();
    out.extend(app.inner.extra.values().map(|p| ProblemInfo {
        id: p.id.clone(),
        description: "registered problem".into(),
        components: Some(p.dpi.num_components()),
    }));
    Json(out)
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    problem_id: Option<String>,
    /// An instance in the JSON interchange format.
    dpi: Option<serde_json::Value>,
    /// A circuit in the netlist DSL.
    circuit: Option<String>,
    #[serde(flatten)]
    config: SessionConfig,
}

fn instance(app: &AppState, req: &CreateSession) -> Result<(String, Dpi), ApiError> {
    match (&req.problem_id, &req.dpi, &req.circuit) {
        (Some(id), None, None) => Ok((id.clone(), app.resolve(id)?.dpi)),
        (None, Some(doc), None) => parse_dpi_json(&doc.to_string())
            .map(|d| ("inline".to_string(), d))
            .map_err(|e| ApiError::unprocessable(e.to_string())),
        (None, None, Some(text)) => {
            let spec = parse_circuit_dsl(text).map_err(|e| ApiError::unprocessable(e.to_string()))?;
            encode_circuit_to_dpi(&spec)
                .map(|d| ("inline".to_string(), d))
                .map_err(|e| ApiError::unprocessable(e.to_string()))
        }
        _ => Err(ApiError::unprocessable("give exactly one of problem_id, dpi or circuit")),
    }
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let c = &req.config;
    if c.k < 2 {
        return Err(ApiError::unprocessable("k must be at least 2"));
    }
    if !(c.sigma > 0.0 && c.sigma <= 1.0) {
        return Err(ApiError::unprocessable("sigma must lie in (0, 1]"));
    }
    let (problem_id, dpi) = instance(&app, &req)?;
    let state = SessionState::new(dpi, req.config.clone())?;
    app.reap_expired();
    let id = uuid::Uuid::new_v4().to_string();
    let entry = Entry {
        problem_id,
        state,
        touched: Instant::now(),
    };
    let view = snapshot(&id, &entry);
    app.sessions().insert(id.clone(), Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "state": view }))))
}

fn lock(entry: &Mutex<Entry>) -> std::sync::MutexGuard<'_, Entry> {
    entry.lock().unwrap_or_else(|p| p.into_inner())
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Snapshot>, ApiError> {
    let entry = app.session(&id)?;
    let mut e = lock(&entry);
    e.touched = Instant::now();
    Ok(Json(snapshot(&id, &e)))
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match app.sessions().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("no session {id}"))),
    }
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    value: serde_json::Value,
    token: Option<String>,
}

fn answer_value(v: &serde_json::Value) -> Result<AnswerValue, ApiError> {
    match v {
        serde_json::Value::Bool(b) => Ok(AnswerValue::from(*b)),
        serde_json::Value::String(s) => match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Ok(AnswerValue::True),
            "false" | "no" | "0" => Ok(AnswerValue::False),
            "skip" => Ok(AnswerValue::Skip),
            _ => Err(ApiError::unprocessable(format!("invalid answer value {s:?}"))),
        },
        other => Err(ApiError::unprocessable(format!("invalid answer value {other}"))),
    }
}

async fn answer_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Snapshot>, ApiError> {
    let entry = app.session(&id)?;
    let req: AnswerBody = parse_body(&body)?;
    let value = answer_value(&req.value)?;
    let mut e = lock(&entry);
    if e.state.is_stopped() {
        return Err(ApiError::conflict("the session has stopped"));
    }
    if let Some(token) = &req.token {
        if e.state.query_token().as_deref() != Some(token.as_str()) {
            return Err(ApiError::conflict(format!("stale query token {token:?}")));
        }
    }
    e.state.answer(Answer::human(value))?;
    e.touched = Instant::now();
    Ok(Json(snapshot(&id, &e)))
}

#[derive(Debug, Deserialize)]
struct ProposeBody {
    wire: String,
}

async fn propose_wire(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Snapshot>, ApiError> {
    let entry = app.session(&id)?;
    let req: ProposeBody = parse_body(&body)?;
    let mut e = lock(&entry);
    e.state.propose(&req.wire)?;
    e.touched = Instant::now();
    Ok(Json(snapshot(&id, &e)))
}
