//! HTTP/WebSocket session API.
//!
//! ```text
//! POST /v1/sessions                    create; returns per-agent keys
//! GET  /v1/sessions                    list
//! GET  /v1/sessions/{id}               summary
//! POST /v1/sessions/{id}/intents       submit or replace an intent (agent key)
//! POST /v1/sessions/{id}/negotiate     run offers, rounds and consensus (agent key)
//! GET  /v1/sessions/{id}/offers
//! GET  /v1/sessions/{id}/transcript    NDJSON, signed envelopes
//! GET  /v1/sessions/{id}/trust
//! GET  /v1/sessions/{id}/events        WebSocket, `?from=N` replays from message N
//! GET  /v1/telemetry                   query the telemetry store
//! POST /v1/telemetry                   push one record
//! ```
//!
//! Agents authenticate with `Authorization: Bearer <hex key>`, the same key
//! that signs their envelopes. A session negotiates in epochs: once an
//! epoch has reached consensus (or aborted), a new intent or negotiate call
//! opens the next one as `{id}-e{n}`, carrying forward the intents of
//! agents that did not resubmit.

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use srb_core::agents::{Persona, ScriptedAgent};
use srb_core::broker::{record, run_rounds, BrokerError, NegotiationSetup, Participant};
use srb_core::executive::{ExecutiveError, Query as TelemetryQuery, TelemetryRecord, TelemetryStore};
use srb_core::judicial::Lexicon;
use srb_core::kpi::KpiModel;
use srb_core::netsim::{self, McsTrace, PhasePlan, RunMode, SimConfig, SlicePhaseSummary};
use srb_core::optimizer::Offer;
use srb_core::protocol::{
    render_transcript, EnforcementDirective, Envelope, Intent, KeyRing, MessageKind, ProtocolError, Recommendation,
    SessionPhase, SessionState, VerdictPayload, MEDIATOR,
};
use srb_core::runner::{self, RunError};
use srb_core::scenario::Scenario;
use srb_core::trust::{evaluate_transcript, SessionTrust, TrustConfig};
use std::collections::BTreeMap;
use std::future::Future;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use tokio::sync::{broadcast, Mutex};

const EVENT_BUFFER: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("missing or unknown agent key")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::WrongPhase { .. } | ProtocolError::InvalidTransition { .. } => ApiError::Conflict(e.to_string()),
            ProtocolError::InvalidIntent(_) | ProtocolError::UnknownAgent(_) | ProtocolError::Payload(_) => {
                ApiError::Unprocessable(e.to_string())
            }
            e => ApiError::Internal(e.to_string()),
        }
    }
}

impl From<BrokerError> for ApiError {
    fn from(e: BrokerError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared server state: scenario defaults, sessions and the telemetry store.
pub struct AppState {
    scenario: Scenario,
    model: KpiModel,
    lexicon: Lexicon,
    trust: TrustConfig,
    deterministic: bool,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
    pub telemetry: TelemetryStore,
}

impl AppState {
    pub fn new(scenario: Scenario, telemetry_log: Option<&Path>, deterministic: bool) -> Result<Arc<Self>, RunError> {
        let telemetry = match telemetry_log {
            Some(p) => TelemetryStore::open(p).map_err(|e| RunError::Config(e.to_string()))?,
            None => TelemetryStore::in_memory(),
        };
        Ok(Arc::new(Self {
            model: runner::kpi_model(&scenario)?,
            lexicon: runner::lexicon(&scenario)?,
            trust: runner::trust_config(&scenario)?,
            scenario,
            deterministic,
            sessions: RwLock::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
            telemetry,
        }))
    }

    fn session(&self, id: &str) -> ApiResult<Arc<SessionHandle>> {
        self.sessions
            .read()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }
}

/// One session: a single writer behind the mutex, and a broadcast of every
/// envelope it records.
pub struct SessionHandle {
    pub id: String,
    inner: Mutex<SessionInner>,
    events: broadcast::Sender<Envelope>,
}

struct SessionInner {
    cast: Vec<(String, Persona)>,
    keys: KeyRing,
    mcs: u8,
    phase: String,
    arbitration: bool,
    max_rounds: u32,
    epoch: u32,
    state: SessionState,
    transcript: Vec<Envelope>,
    carried: BTreeMap<String, Intent>,
    next_ts: u64,
    telemetry_seq: u64,
    last: Option<NegotiationView>,
}

fn epoch_id(base: &str, epoch: u32) -> String {
    if epoch == 0 {
        base.to_string()
    } else {
        format!("{base}-e{epoch}")
    }
}

impl SessionInner {
    fn agents(&self) -> Vec<String> {
        self.cast.iter().map(|(a, _)| a.clone()).collect()
    }

    fn now(&mut self, deterministic: bool) -> u64 {
        if deterministic {
            let t = self.next_ts;
            self.next_ts += 1;
            t
        } else {
            let t = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64);
            self.next_ts = self.next_ts.max(t);
            self.next_ts
        }
    }

    /// Starts the next epoch unless the current one still collects intents.
    fn ensure_open(&mut self, base: &str) {
        if self.state.phase == SessionPhase::CollectingIntents {
            return;
        }
        self.carried.extend(self.state.intents.clone());
        self.epoch += 1;
        self.state = SessionState::new(&epoch_id(base, self.epoch), self.agents(), self.max_rounds);
    }
}

impl SessionHandle {
    fn emit(&self, inner: &mut SessionInner, env: Envelope) {
        inner.transcript.push(env.clone());
        let _ = self.events.send(env);
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentSpec {
    id: String,
    #[serde(default = "default_persona")]
    persona: Persona,
}

fn default_persona() -> Persona {
    Persona::Agreeable
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CreateSession {
    agents: Option<Vec<AgentSpec>>,
    mcs: Option<u8>,
    phase: Option<String>,
    arbitration: Option<bool>,
    max_rounds: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NegotiateBody {
    mcs: Option<u8>,
    phase: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct AgentView {
    id: String,
    persona: Persona,
}

#[derive(Debug, Clone, Serialize)]
struct SessionSummary {
    id: String,
    session_id: String,
    epoch: u32,
    state: SessionPhase,
    round: u32,
    mcs: u8,
    phase: String,
    agents: Vec<AgentView>,
    intents: Vec<String>,
    consensus_offer: Option<u32>,
    messages: usize,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct SimulationView {
    phase: String,
    mcs: u8,
    ttis: u64,
    slices: BTreeMap<String, SlicePhaseSummary>,
}

#[derive(Debug, Clone, Serialize)]
struct NegotiationView {
    session_id: String,
    epoch: u32,
    rounds: u32,
    consensus_offer: Option<u32>,
    forced: bool,
    directive: Option<EnforcementDirective>,
    front_size: usize,
    verdicts: Vec<VerdictPayload>,
    infeasible: Option<String>,
    simulation: Option<SimulationView>,
}

#[derive(Debug, Clone, Serialize)]
struct OffersView<'a> {
    session_id: &'a str,
    epoch: u32,
    phase: &'a str,
    state: SessionPhase,
    short_front: bool,
    offers: &'a [Offer],
    recommendation: Option<&'a Recommendation>,
    consensus_offer: Option<u32>,
    directive: Option<&'a EnforcementDirective>,
}

fn summary(id: &str, inner: &SessionInner) -> SessionSummary {
    SessionSummary {
        id: id.to_string(),
        session_id: inner.state.session_id.clone(),
        epoch: inner.epoch,
        state: inner.state.phase,
        round: inner.state.round,
        mcs: inner.mcs,
        phase: inner.phase.clone(),
        agents: inner.cast.iter().map(|(id, p)| AgentView { id: id.clone(), persona: *p }).collect(),
        intents: inner.state.intents.keys().cloned().collect(),
        consensus_offer: inner.state.consensus_offer,
        messages: inner.transcript.len(),
        warnings: inner.state.warnings.clone(),
    }
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid body: {e}")))
}

/// Agent owning the bearer key, if it belongs to the session.
fn authenticate(headers: &HeaderMap, keys: &KeyRing) -> ApiResult<String> {
    let token = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or(ApiError::Unauthorized)?;
    match keys.participant_for(token.trim()) {
        Some(a) if a != MEDIATOR => Ok(a.to_string()),
        _ => Err(ApiError::Unauthorized),
    }
}

fn check_mcs(app: &AppState, mcs: u8) -> ApiResult<()> {
    app.model.table().entry(mcs).map(|_| ()).map_err(|e| ApiError::Unprocessable(e.to_string()))
}

async fn create_session(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: CreateSession = parse_body(&body)?;
    let f = &app.scenario.file;
    let cast: Vec<(String, Persona)> = match req.agents {
        Some(a) => a.into_iter().map(|s| (s.id, s.persona)).collect(),
        None => f.stakeholders.iter().map(|s| (s.id.clone(), s.persona.unwrap_or(Persona::Agreeable))).collect(),
    };
    if cast.is_empty() {
        return Err(ApiError::Unprocessable("a session needs at least one agent".into()));
    }
    for (i, (id, _)) in cast.iter().enumerate() {
        if id.trim().is_empty() || id == MEDIATOR || cast[..i].iter().any(|(o, _)| o == id) {
            return Err(ApiError::Unprocessable(format!("agent id `{id}` is empty, reserved or repeated")));
        }
    }
    let first = f.phases.first();
    let mcs = req.mcs.or(first.map(|p| p.mcs)).unwrap_or(28);
    check_mcs(&app, mcs)?;
    let n = app.next_id.fetch_add(1, Ordering::SeqCst);
    let id = format!("sess-{n:04}");
    let names: Vec<&str> = cast.iter().map(|(a, _)| a.as_str()).chain([MEDIATOR]).collect();
    let keys = if app.deterministic {
        KeyRing::deterministic(f.seed.wrapping_add(n), names)
    } else {
        KeyRing::random(names)
    };
    let agent_keys: BTreeMap<String, String> =
        cast.iter().map(|(a, _)| (a.clone(), keys.key_hex(a).expect("generated key"))).collect();
    let max_rounds = req.max_rounds.unwrap_or(f.negotiation.max_rounds).max(1);
    let agents = cast.iter().map(|(a, _)| a.clone()).collect();
    let inner = SessionInner {
        state: SessionState::new(&id, agents, max_rounds),
        keys: keys.clone(),
        mcs,
        phase: req.phase.or(first.map(|p| p.id.clone())).unwrap_or_default(),
        arbitration: req.arbitration.unwrap_or(f.negotiation.arbitration),
        max_rounds,
        epoch: 0,
        transcript: Vec::new(),
        carried: BTreeMap::new(),
        next_ts: 0,
        telemetry_seq: 0,
        last: None,
        cast,
    };
    let body = json!({ "session": summary(&id, &inner), "keys": agent_keys });
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let handle = Arc::new(SessionHandle { id: id.clone(), inner: Mutex::new(inner), events });
    app.sessions.write().expect("session map").insert(id, handle);
    Ok((StatusCode::CREATED, Json(body)))
}

async fn list_sessions(State(app): State<Arc<AppState>>) -> Json<Vec<SessionSummary>> {
    let handles: Vec<Arc<SessionHandle>> = app.sessions.read().expect("session map").values().cloned().collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(summary(&h.id, &*h.inner.lock().await));
    }
    Json(out)
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionSummary>> {
    let h = app.session(&id)?;
    let inner = h.inner.lock().await;
    Ok(Json(summary(&id, &inner)))
}

async fn submit_intent(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let h = app.session(&id)?;
    let mut inner = h.inner.lock().await;
    let agent = authenticate(&headers, &inner.keys)?;
    let mut v: Value = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid body: {e}")))?;
    let obj = v.as_object_mut().ok_or_else(|| ApiError::BadRequest("intent must be a JSON object".into()))?;
    match obj.get("agent_id").and_then(Value::as_str) {
        Some(a) if a != agent => return Err(ApiError::Forbidden(format!("key belongs to `{agent}`, not `{a}`"))),
        _ => {
            obj.insert("agent_id".into(), Value::String(agent.clone()));
        }
    }
    if obj.get("phase").and_then(Value::as_str).map_or(true, str::is_empty) {
        obj.insert("phase".into(), Value::String(inner.phase.clone()));
    }
    let intent: Intent = serde_json::from_value(v).map_err(|e| ApiError::Unprocessable(format!("invalid intent: {e}")))?;
    intent.validate()?;
    inner.ensure_open(&id);
    let ts = inner.now(app.deterministic);
    let warnings = inner.state.warnings.len();
    let env = {
        let SessionInner { state, keys, .. } = &mut *inner;
        record(state, keys, ts, 0, &agent, MessageKind::Intent, &intent)?
    };
    let seq = inner.transcript.len();
    h.emit(&mut inner, env);
    let replaced = inner.state.warnings.len() > warnings;
    let pending: Vec<String> =
        inner.agents().into_iter().filter(|a| !inner.state.intents.contains_key(a) && !inner.carried.contains_key(a)).collect();
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": inner.state.session_id,
            "epoch": inner.epoch,
            "seq": seq,
            "replaced": replaced,
            "pending": pending,
        })),
    ))
}

fn simulate(app: &AppState, directive: &EnforcementDirective, mcs: u8, phase: &str) -> ApiResult<SimulationView> {
    let f = &app.scenario.file;
    let ttis = f.phases.first().map_or(625, |p| p.ttis);
    let plan = PhasePlan {
        phase: phase.to_string(),
        start_tti: 0,
        ttis,
        slices: runner::slice_configs(directive, directive, &app.model, f.netsim.load_factor),
        degraded: false,
    };
    let trace = McsTrace::from_segments(&[(ttis, mcs)]).map_err(|e| ApiError::Internal(e.to_string()))?;
    let sim = SimConfig {
        prbs_per_tti: f.netsim.prbs_per_tti,
        packet_bits: f.kpi.packet_bits,
        release_unused: true,
        arrivals: f.netsim.arrivals,
        seed: f.seed,
    };
    let report = netsim::run(&[plan], &trace, &app.model, f.budget.b_max, RunMode::Dynamic, sim)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    let slices = report.phases.into_iter().next().map(|p| p.slices).unwrap_or_default();
    Ok(SimulationView { phase: phase.to_string(), mcs, ttis, slices })
}

fn push_sim_telemetry(app: &AppState, inner: &mut SessionInner, base: &str, sim: &SimulationView, ts: u64) -> ApiResult<()> {
    for s in sim.slices.values() {
        let mut metrics = vec![("throughput_mbps", s.mean_throughput_mbps), ("prbs", s.prbs_total as f64)];
        if let Some(l) = s.median_latency_ms {
            metrics.push(("latency_ms", l));
        }
        for (metric, value) in metrics {
            inner.telemetry_seq += 1;
            let rec = TelemetryRecord {
                key: format!("session/{base}/{}/{metric}", s.class),
                value: value.into(),
                ts,
                source: format!("session/{base}"),
                seq: inner.telemetry_seq,
                version: 0,
            };
            app.telemetry.push(rec).map_err(|e| ApiError::Internal(e.to_string()))?;
        }
    }
    Ok(())
}

async fn negotiate(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<NegotiationView>> {
    let h = app.session(&id)?;
    let mut inner = h.inner.lock().await;
    authenticate(&headers, &inner.keys)?;
    let req: NegotiateBody = parse_body(&body)?;
    if let Some(m) = req.mcs {
        check_mcs(&app, m)?;
        inner.mcs = m;
    }
    if let Some(p) = req.phase {
        inner.phase = p;
    }
    inner.ensure_open(&id);
    for agent in inner.agents() {
        if inner.state.intents.contains_key(&agent) {
            continue;
        }
        let Some(mut intent) = inner.carried.get(&agent).cloned() else { continue };
        intent.phase = inner.phase.clone();
        let ts = inner.now(app.deterministic);
        let env = {
            let SessionInner { state, keys, .. } = &mut *inner;
            record(state, keys, ts, 0, &agent, MessageKind::Intent, &intent)?
        };
        h.emit(&mut inner, env);
    }
    let missing: Vec<String> = inner.agents().into_iter().filter(|a| !inner.state.intents.contains_key(a)).collect();
    if !missing.is_empty() {
        return Err(ApiError::Conflict(format!("waiting for intents from {}", missing.join(", "))));
    }

    let state = inner.state.clone();
    let keys = inner.keys.clone();
    let cast = inner.cast.clone();
    let (mcs, arbitration, max_rounds, epoch) = (inner.mcs, inner.arbitration, inner.max_rounds, inner.epoch);
    let (deterministic, start_ts) = (app.deterministic, inner.next_ts);
    let app2 = app.clone();
    let (outcome, next_ts) = tokio::task::spawn_blocking(move || {
        let f = &app2.scenario.file;
        let agents: Vec<ScriptedAgent> =
            cast.iter().map(|(_, p)| ScriptedAgent { arbitration_enabled: arbitration, ..ScriptedAgent::new(*p) }).collect();
        let participants: Vec<Participant<'_>> =
            cast.iter().zip(&agents).map(|((id, _), a)| Participant { id: id.clone(), policy: a }).collect();
        let setup = NegotiationSetup {
            session_id: state.session_id.clone(),
            mcs,
            budget: f.budget,
            model: &app2.model,
            nsga: f.optimizer.clone(),
            max_rounds,
            lambda: f.negotiation.mediator_lambda,
            arbitration,
            judicial: f.judicial.config.clone(),
            lexicon: &app2.lexicon,
            agent_seed: f.seed.wrapping_add(u64::from(epoch)),
        };
        let mut t = start_ts;
        let mut clock = || {
            if deterministic {
                t += 1;
                t - 1
            } else {
                let now = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_millis() as u64);
                t = t.max(now);
                t
            }
        };
        let out = run_rounds(&setup, &participants, state, Vec::new(), &keys, &mut clock);
        out.map(|o| (o, t))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;

    inner.next_ts = next_ts;
    inner.state = outcome.state.clone();
    for env in &outcome.transcript {
        h.emit(&mut inner, env.clone());
    }
    let directive = outcome.directive().cloned();
    let simulation = match &directive {
        Some(d) => {
            let sim = simulate(&app, d, inner.mcs, &inner.phase)?;
            let ts = inner.now(app.deterministic);
            let round = inner.state.round;
            let env = {
                let SessionInner { state, keys, .. } = &mut *inner;
                record(state, keys, ts, round, MEDIATOR, MessageKind::Telemetry, &sim)?
            };
            h.emit(&mut inner, env);
            push_sim_telemetry(&app, &mut inner, &id, &sim, ts)?;
            Some(sim)
        }
        None => None,
    };
    let view = NegotiationView {
        session_id: inner.state.session_id.clone(),
        epoch: inner.epoch,
        rounds: outcome.rounds(),
        consensus_offer: outcome.state.consensus_offer,
        forced: outcome.state.forced,
        directive,
        front_size: outcome.front_size,
        verdicts: outcome.verdicts.clone(),
        infeasible: outcome.infeasible.clone(),
        simulation,
    };
    inner.last = Some(view.clone());
    Ok(Json(view))
}

async fn get_offers(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let h = app.session(&id)?;
    let inner = h.inner.lock().await;
    let s = &inner.state;
    let view = OffersView {
        session_id: &s.session_id,
        epoch: inner.epoch,
        phase: &inner.phase,
        state: s.phase,
        short_front: s.short_front,
        offers: &s.offers,
        recommendation: s.recommendation.as_ref(),
        consensus_offer: s.consensus_offer,
        directive: s.directive.as_ref(),
    };
    let mut v = serde_json::to_value(&view).map_err(|e| ApiError::Internal(e.to_string()))?;
    if let Some(last) = &inner.last {
        v["last_negotiation"] = serde_json::to_value(last).map_err(|e| ApiError::Internal(e.to_string()))?;
    }
    Ok(Json(v))
}

async fn get_transcript(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let h = app.session(&id)?;
    let text = render_transcript(&h.inner.lock().await.transcript);
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn get_trust(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Vec<SessionTrust>>> {
    let h = app.session(&id)?;
    let transcript = h.inner.lock().await.transcript.clone();
    evaluate_transcript(&transcript, &app.trust).map(Json).map_err(|e| ApiError::Internal(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: usize,
}

async fn events(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let h = app.session(&id)?;
    Ok(ws.on_upgrade(move |socket| stream_events(socket, h, q.from)))
}

async fn stream_events(mut socket: WebSocket, h: Arc<SessionHandle>, from: usize) {
    let (backlog, mut rx) = {
        let inner = h.inner.lock().await;
        (inner.transcript.get(from..).map(<[Envelope]>::to_vec).unwrap_or_default(), h.events.subscribe())
    };
    for env in backlog {
        let Ok(text) = serde_json::to_string(&env) else { return };
        if socket.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(env) => {
                    let Ok(text) = serde_json::to_string(&env) else { return };
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn query_telemetry(State(app): State<Arc<AppState>>, Query(q): Query<TelemetryQuery>) -> ApiResult<Json<Value>> {
    let version = app.telemetry.current().version;
    let rows = app.telemetry.query(&q).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(json!({ "version": version, "rows": rows })))
}

async fn push_telemetry(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let rec: TelemetryRecord =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid record: {e}")))?;
    match app.telemetry.push(rec) {
        Ok(version) => Ok((StatusCode::CREATED, Json(json!({ "version": version })))),
        Err(e @ ExecutiveError::Conflict { .. }) => Err(ApiError::Conflict(e.to_string())),
        Err(e @ ExecutiveError::InvalidKey(_)) => Err(ApiError::Unprocessable(e.to_string())),
        Err(e) => Err(ApiError::Internal(e.to_string())),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/intents", post(submit_intent))
        .route("/v1/sessions/{id}/negotiate", post(negotiate))
        .route("/v1/sessions/{id}/offers", get(get_offers))
        .route("/v1/sessions/{id}/transcript", get(get_transcript))
        .route("/v1/sessions/{id}/trust", get(get_trust))
        .route("/v1/sessions/{id}/events", get(events))
        .route("/v1/telemetry", get(query_telemetry).post(push_telemetry))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
