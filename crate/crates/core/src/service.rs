//! HTTP/JSON API over live elicitation sessions.
//!
//! | method | path | body / query |
//! |---|---|---|
//! | POST | `/sessions` | `{"fragment"}` or `{"fragments", "policy"}`, plus `agents`, `rules`, `config` |
//! | GET | `/sessions/{id}/network` | |
//! | GET | `/sessions/{id}/beliefs` | |
//! | POST | `/sessions/{id}/utterance` | `{"text"}` |
//! | POST | `/sessions/{id}/evidence` | `{"node", "kind": "hard", "state"}` or `{"node", "kind": "soft", "l_implied", "l_not"}` |
//! | DELETE | `/sessions/{id}/evidence/{node}` | |
//! | GET | `/sessions/{id}/implied` | `?threshold=` |
//! | GET | `/sessions/{id}/events` | `?from=` |
//! | POST | `/sessions/{id}/export` | optional `{"discarded": [ids], "threshold"}` |
//!
//! Errors are `{"error": kind, "detail": message}`. Sessions pause (rather
//! than halt) on conflicts until an operator posts or deletes evidence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State as AxumState};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::agents::{
    parse_agent, AgentError, Event, EventKind, Session, SessionConfig, SessionError, SessionStatus,
};
use crate::bayes::{BayesError, Finding, NodeId, State};
use crate::config::{effective_threshold, Mode};
use crate::elicitation::{parse_rulebook, ElicitationError};
use crate::fragment::{
    compile, parse_fragment, Fragment, FragmentError, ImpliedSet, DEFAULT_BORDERLINE_BAND,
};
use crate::glue::{glue_all, GlueError, GluePolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub detail: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, detail: impl ToString) -> Self {
        ApiError {
            status,
            kind,
            detail: detail.to_string(),
        }
    }

    fn bad_request(kind: &'static str, detail: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": self.kind, "detail": self.detail })),
        )
            .into_response()
    }
}

impl From<FragmentError> for ApiError {
    fn from(e: FragmentError) -> Self {
        let kind = match e {
            FragmentError::SchemaViolation { .. } => "SchemaViolation",
            FragmentError::DuplicateNode(_) => "DuplicateNode",
            FragmentError::UnknownParent { .. } => "UnknownParent",
            FragmentError::CycleInFragment(_) => "CycleInFragment",
            FragmentError::Cpt { .. } => "InvalidCpt",
        };
        Self::bad_request(kind, e)
    }
}

impl From<GlueError> for ApiError {
    fn from(e: GlueError) -> Self {
        Self::bad_request(e.kind(), e)
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let kind = match e {
            AgentError::SchemaViolation { .. } => "SchemaViolation",
            AgentError::UnknownActionKind { .. } => "UnknownActionKind",
        };
        Self::bad_request(kind, e)
    }
}

impl From<ElicitationError> for ApiError {
    fn from(e: ElicitationError) -> Self {
        let kind = match e {
            ElicitationError::SchemaViolation { .. } => "SchemaViolation",
            ElicitationError::EmptyPattern(_) => "EmptyPattern",
        };
        Self::bad_request(kind, e)
    }
}

impl From<BayesError> for ApiError {
    fn from(e: BayesError) -> Self {
        match e {
            BayesError::UnknownNode(_) => Self::new(StatusCode::NOT_FOUND, "UnknownNode", e),
            BayesError::EvidenceContradiction => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "EvidenceContradiction", e)
            }
            BayesError::InvalidLikelihood { .. } => Self::bad_request("InvalidLikelihood", e),
            BayesError::InvalidNetwork(_) => Self::bad_request("InvalidNetwork", e),
            BayesError::InvalidNodeId(_) => Self::bad_request("InvalidNodeId", e),
            BayesError::TooLarge { .. } => Self::bad_request("TooLarge", e),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Bayes(inner) => inner.into(),
            SessionError::Agent(inner) => inner.into(),
            SessionError::DuplicateAgent(_) => Self::bad_request("DuplicateAgent", e),
            SessionError::UnknownNode { .. } => Self::bad_request("UnknownNode", e),
            SessionError::Paused => Self::new(StatusCode::CONFLICT, "SessionPaused", e),
            SessionError::Halted => Self::new(StatusCode::CONFLICT, "SessionHalted", e),
        }
    }
}

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        ApiError::bad_request("SchemaViolation", format!("at `{at}`: {}", e.into_inner()))
    })
}

/// Session settings accepted at creation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub band: Option<f64>,
    #[serde(default)]
    pub batch_propagate: bool,
    #[serde(default)]
    pub max_rounds: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    fragment: Option<Value>,
    #[serde(default)]
    fragments: Option<Vec<Value>>,
    #[serde(default)]
    policy: GluePolicy,
    #[serde(default)]
    agents: Vec<Value>,
    #[serde(default)]
    rules: Option<Value>,
    #[serde(default)]
    config: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub config: HandleConfig,
    pub next_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandleConfig {
    pub threshold: f64,
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    pub events: Vec<Event>,
    /// Pass as `from` to fetch only newer events.
    pub next_seq: u64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum EvidenceRequest {
    Hard {
        node: NodeId,
        state: State,
    },
    Soft {
        node: NodeId,
        l_implied: f64,
        l_not: f64,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportRequest {
    #[serde(default)]
    discarded: BTreeSet<NodeId>,
    #[serde(default)]
    threshold: Option<f64>,
}

struct Entry {
    session: Session,
    fragment: Fragment,
    handle: SessionHandle,
    persisted_to: u64,
}

/// Shared server state. Each session has its own lock, so requests on
/// different sessions proceed in parallel.
#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
    transcript_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(transcript_dir: Option<PathBuf>) -> Self {
        AppState {
            transcript_dir,
            ..AppState::default()
        }
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "UnknownSession",
                    format!("no session `{id}`"),
                )
            })
    }

    /// Append events not yet written to `<dir>/<id>.jsonl`.
    fn persist(&self, entry: &mut Entry) -> Result<(), ApiError> {
        let Some(dir) = &self.transcript_dir else {
            return Ok(());
        };
        let fresh = entry.session.transcript().since(entry.persisted_to);
        if fresh.is_empty() {
            return Ok(());
        }
        let io = |e: std::io::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", e);
        std::fs::create_dir_all(dir).map_err(io)?;
        let path = dir.join(format!("{}.jsonl", entry.handle.session_id));
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        for event in fresh {
            writeln!(
                file,
                "{}",
                serde_json::to_string(event).expect("event serializes")
            )
            .map_err(io)?;
        }
        entry.persisted_to = entry.session.next_seq();
        Ok(())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/network", get(get_network))
        .route("/sessions/{id}/beliefs", get(get_beliefs))
        .route("/sessions/{id}/utterance", post(post_utterance))
        .route("/sessions/{id}/evidence", post(post_evidence))
        .route("/sessions/{id}/evidence/{node}", delete(delete_evidence))
        .route("/sessions/{id}/implied", get(get_implied))
        .route("/sessions/{id}/events", get(get_events))
        .route("/sessions/{id}/export", post(export_spec))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, transcript_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(AppState::new(transcript_dir)))).await
}

type Shared = AxumState<Arc<AppState>>;

fn build_fragment(req: &CreateRequest) -> Result<Fragment, ApiError> {
    let to_fragment = |v: &Value| parse_fragment(&serde_json::to_vec(v).expect("value serializes"));
    match (&req.fragment, &req.fragments) {
        (Some(f), None) => Ok(to_fragment(f)?),
        (None, Some(list)) => {
            let fragments = list
                .iter()
                .map(to_fragment)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(glue_all(&fragments, req.policy)?.0)
        }
        _ => Err(ApiError::bad_request(
            "SchemaViolation",
            "give exactly one of `fragment` or `fragments`",
        )),
    }
}

async fn create_session(
    AxumState(state): Shared,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionHandle>), ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let fragment = build_fragment(&req)?;
    let network = compile(&fragment)?;
    let agents = req
        .agents
        .iter()
        .map(|v| parse_agent(&serde_json::to_vec(v).expect("value serializes")))
        .collect::<Result<Vec<_>, _>>()?;
    let rules = match &req.rules {
        Some(v) => parse_rulebook(&serde_json::to_vec(v).expect("value serializes"))?,
        None => Vec::new(),
    };
    let threshold = effective_threshold(req.config.mode, req.config.threshold);
    let defaults = SessionConfig::default();
    let config = SessionConfig {
        threshold,
        band: req.config.band.unwrap_or(DEFAULT_BORDERLINE_BAND),
        max_rounds: req.config.max_rounds.unwrap_or(defaults.max_rounds),
        batch_propagate: req.config.batch_propagate,
        halt_on_conflict: false,
    };
    let session = Session::new(network, agents, rules, config)?;

    let n = state.next_id.fetch_add(1, Ordering::Relaxed) + 1;
    let created_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let handle = SessionHandle {
        session_id: format!("s{n}"),
        created_at,
        config: HandleConfig {
            threshold,
            mode: req.config.mode,
        },
        next_seq: session.next_seq(),
    };
    let mut entry = Entry {
        session,
        fragment,
        handle: handle.clone(),
        persisted_to: 0,
    };
    state.persist(&mut entry)?;
    state
        .sessions
        .lock()
        .expect("session table lock")
        .insert(handle.session_id.clone(), Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(handle)))
}

fn with_entry<T>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(&mut Entry) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let entry = state.get(id)?;
    let mut guard = entry.lock().expect("session lock");
    let result = f(&mut guard);
    state.persist(&mut guard)?;
    result
}

fn page(session: &Session, from: u64) -> EventPage {
    EventPage {
        events: session.transcript().since(from).to_vec(),
        next_seq: session.next_seq(),
    }
}

async fn get_network(
    AxumState(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<Fragment>, ApiError> {
    with_entry(&state, &id, |e| Ok(Json(e.fragment.clone())))
}

async fn get_beliefs(
    AxumState(state): Shared,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    with_entry(&state, &id, |e| {
        let s = &e.session;
        let evidence: BTreeMap<String, Value> = s
            .evidence()
            .findings()
            .into_iter()
            .map(|(node, finding)| {
                let mut v = serde_json::to_value(finding).expect("finding serializes");
                v["actor"] = json!(s.evidence().provenance(node.as_str()));
                (node.to_string(), v)
            })
            .collect();
        Ok(Json(json!({
            "beliefs": s.beliefs(),
            "evidence": evidence,
            "status": s.status(),
            "next_seq": s.next_seq(),
        })))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRequest {
    text: String,
}

async fn post_utterance(
    AxumState(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EventPage>, ApiError> {
    let req: UtteranceRequest = parse_body(&body)?;
    with_entry(&state, &id, |e| {
        let from = e.session.utterance(&req.text)?;
        Ok(Json(page(&e.session, from)))
    })
}

async fn post_evidence(
    AxumState(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EventPage>, ApiError> {
    let req: EvidenceRequest = parse_body(&body)?;
    with_entry(&state, &id, |e| {
        let from = match req {
            EvidenceRequest::Hard { node, state } => {
                e.session.operator_set(&node, Finding::Hard { state })?
            }
            EvidenceRequest::Soft {
                node,
                l_implied,
                l_not,
            } => e
                .session
                .operator_set(&node, Finding::Soft { l_implied, l_not })?,
        };
        Ok(Json(page(&e.session, from)))
    })
}

async fn delete_evidence(
    AxumState(state): Shared,
    Path((id, node)): Path<(String, String)>,
) -> Result<Json<EventPage>, ApiError> {
    let node = NodeId::new(node)?;
    with_entry(&state, &id, |e| {
        let from = e.session.operator_retract(&node)?;
        Ok(Json(page(&e.session, from)))
    })
}

fn query_number<T: std::str::FromStr>(
    query: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, ApiError> {
    query
        .get(key)
        .map(|raw| {
            raw.parse::<T>().map_err(|_| {
                ApiError::bad_request(
                    "SchemaViolation",
                    format!("query `{key}` is not a number: `{raw}`"),
                )
            })
        })
        .transpose()
}

async fn get_implied(
    AxumState(state): Shared,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<ImpliedSet>, ApiError> {
    let threshold = query_number::<f64>(&query, "threshold")?;
    if threshold.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
        return Err(ApiError::bad_request(
            "SchemaViolation",
            "threshold must be within [0, 1]",
        ));
    }
    with_entry(&state, &id, |e| Ok(Json(e.session.implied(threshold))))
}

async fn get_events(
    AxumState(state): Shared,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Json<EventPage>, ApiError> {
    let from = query_number::<u64>(&query, "from")?.unwrap_or(0);
    with_entry(&state, &id, |e| Ok(Json(page(&e.session, from))))
}

async fn export_spec(
    AxumState(state): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: ExportRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ExportRequest::default()
    } else {
        parse_body(&body)?
    };
    with_entry(&state, &id, |e| {
        let implied = e.session.implied(req.threshold);
        let doc = render_specification(&e.fragment, &e.session, &implied, &req.discarded);
        Ok((
            [(
                axum::http::header::CONTENT_TYPE,
                "text/plain; charset=utf-8",
            )],
            doc,
        )
            .into_response())
    })
}

fn evidence_line(event: &Event) -> Option<String> {
    let p = &event.payload;
    if p.get("noop").and_then(Value::as_bool).unwrap_or(false) {
        return None;
    }
    let node = p.get("node")?.as_str()?;
    let what = match event.kind {
        EventKind::Assert => format!("asserted {node} {}", p.get("state")?.as_str()?),
        EventKind::Retract => format!("retracted {node}"),
        EventKind::Soft => format!(
            "soft evidence on {node} (likelihoods {}, {})",
            p.get("l_implied")?.as_f64()?,
            p.get("l_not")?.as_f64()?
        ),
        _ => return None,
    };
    Some(format!("  [{}] {} {what}", event.seq, event.actor))
}

/// Plain-text specification: implied requirements with their text and
/// beliefs, the evidence trail, and a borderline appendix. Discarded ids are
/// left out of both lists.
pub fn render_specification(
    fragment: &Fragment,
    session: &Session,
    implied: &ImpliedSet,
    discarded: &BTreeSet<NodeId>,
) -> String {
    let mut doc = String::new();
    let _ = writeln!(doc, "TECHNICAL SPECIFICATION: {}", fragment.name);
    let _ = writeln!(doc, "threshold {:.4}", implied.threshold);
    if let SessionStatus::Paused { conflict } | SessionStatus::Halted { conflict } =
        session.status()
    {
        let _ = writeln!(
            doc,
            "note: session stopped on an unresolved conflict ({})",
            json!(conflict)
        );
    }
    let section = |doc: &mut String, title: &str, rows: &[crate::fragment::RankedNode]| {
        let _ = writeln!(doc, "\n{title}");
        let kept: Vec<_> = rows
            .iter()
            .filter(|r| !discarded.contains(&r.node))
            .collect();
        if kept.is_empty() {
            let _ = writeln!(doc, "  (none)");
        }
        for r in kept {
            let (title, description) = fragment
                .node(r.node.as_str())
                .map(|n| (n.title.as_str(), n.description.as_str()))
                .unwrap_or(("", ""));
            let _ = writeln!(doc, "  {} - {} (belief {:.4})", r.node, title, r.belief);
            if !description.is_empty() {
                let _ = writeln!(doc, "      {description}");
            }
        }
    };
    section(&mut doc, "IMPLIED REQUIREMENTS", &implied.implied);
    let _ = writeln!(doc, "\nEVIDENCE TRAIL");
    let trail: Vec<String> = session
        .transcript()
        .events()
        .iter()
        .filter_map(evidence_line)
        .collect();
    if trail.is_empty() {
        let _ = writeln!(doc, "  (none)");
    }
    for line in trail {
        let _ = writeln!(doc, "{line}");
    }
    section(
        &mut doc,
        "APPENDIX: BORDERLINE REQUIREMENTS",
        &implied.borderline,
    );
    doc
}
