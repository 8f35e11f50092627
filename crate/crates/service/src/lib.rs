//! HTTP+JSON facade over the session pipeline.
//!
//! Mutating requests for one session serialize on a per-session lock and
//! run the pipeline on the blocking pool. While a step runs the stored
//! session reports `status: running`, so clients can poll `GET` on it.
//! A request carrying a `token` already seen for that session gets the
//! original response back without running again.

mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

use autoopt::agents::{backend, AgentError, AgentKind};
use autoopt::pipeline::{Choice, Pipeline, PipelineError, PipelineSettings, Session};
use autoopt::scene::{load_scene, packaged, Scene, Vec3};

pub use store::{Replay, SessionStore, Status, StoreError, StoredSession};

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub path: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            path: String::new(),
        }
    }

    /// Fills in the request path unless a more specific one is set.
    fn at(mut self, uri: &Uri) -> Self {
        if self.path.is_empty() {
            self.path = uri.path().to_owned();
        }
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) | StoreError::BadId(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "session_not_found", e.to_string())
            }
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", e.to_string())
            }
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let (status, code) = match &e {
            PipelineError::UnknownScene(_) => (StatusCode::NOT_FOUND, "unknown_scene"),
            PipelineError::Phase { .. } | PipelineError::NoHistory => (StatusCode::CONFLICT, "phase_conflict"),
            PipelineError::EmptyInstruction => (StatusCode::UNPROCESSABLE_ENTITY, "empty_instruction"),
            PipelineError::Domain(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            PipelineError::Config(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_spec"),
            PipelineError::Agent(AgentError::Timeout) => (StatusCode::GATEWAY_TIMEOUT, "agent_timeout"),
            PipelineError::Agent(_) => (StatusCode::BAD_GATEWAY, "agent_error"),
            PipelineError::Solver(_) => (StatusCode::INTERNAL_SERVER_ERROR, "solver_error"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut err = ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.inner().to_string());
        let path = e.path().to_string();
        if path != "." {
            err.path = path;
        }
        err
    })
}

struct Inner {
    pipeline: Pipeline,
    store: SessionStore,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(pipeline: Pipeline, store: SessionStore) -> Self {
        Self(Arc::new(Inner {
            pipeline,
            store,
            locks: Mutex::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &SessionStore {
        &self.0.store
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.0.pipeline
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.0.locks.lock().expect("lock table poisoned");
        Arc::clone(locks.entry(id.to_owned()).or_default())
    }

    /// Runs `op` on a copy of the session under its lock and commits the
    /// result. Retries with a known token replay the first response.
    async fn mutate<F>(&self, id: &str, token: Option<String>, op: F) -> ApiResult<(StatusCode, Value)>
    where
        F: FnOnce(&Pipeline, &mut Session) -> Result<Value, PipelineError> + Send + 'static,
    {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let store = &self.0.store;
        let mut stored = store.load(id)?;
        if let Some(replay) = token.as_ref().and_then(|t| stored.tokens.get(t)) {
            let status = StatusCode::from_u16(replay.status).unwrap_or(StatusCode::OK);
            return Ok((status, replay.body.clone()));
        }
        stored.status = Status::Running;
        store.save(&stored)?;

        let inner = Arc::clone(&self.0);
        let mut session = stored.session.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let r = op(&inner.pipeline, &mut session);
            (session, r)
        })
        .await;
        stored.status = Status::Idle;
        let (session, result) = match outcome {
            Ok(v) => v,
            Err(join) => {
                stored.last_error = Some(format!("pipeline step aborted: {join}"));
                store.save(&stored)?;
                return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "pipeline step aborted"));
            }
        };
        match result {
            Ok(extra) => {
                stored.session = session;
                stored.last_error = None;
                let body = json!({ "result": extra, "session": view(&stored) });
                if let Some(t) = token {
                    stored.tokens.insert(t, Replay { status: 200, body: body.clone() });
                }
                store.save(&stored)?;
                Ok((StatusCode::OK, body))
            }
            Err(e) => {
                stored.last_error = Some(e.to_string());
                store.save(&stored)?;
                Err(e.into())
            }
        }
    }
}

fn view(stored: &StoredSession) -> Value {
    let s = &stored.session;
    json!({
        "id": s.id,
        "scene_id": s.scene_id,
        "phase": s.phase,
        "status": stored.status,
        "last_error": stored.last_error,
        "history": s.history,
        "pending_question": s.pending_question,
        "clarification_rounds": s.clarification_rounds,
        "defaults_applied": s.defaults_applied,
        "candidate_count": s.candidates.len(),
        "recommended": s.recommended,
        "rationale": s.rationale,
        "selected": s.selected,
        "final_layout": s.final_layout,
        "pins": s.pins,
        "metrics": s.metrics(),
        "timings": s.timings,
    })
}

pub fn router(state: AppState, allowed_origins: &[String]) -> Router {
    let api = Router::new()
        .route("/api/scenes", get(list_scenes))
        .route("/api/scenes/{id}", get(get_scene))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/instruction", post(instruction))
        .route("/api/sessions/{id}/answer", post(answer))
        .route("/api/sessions/{id}/candidates", get(candidates))
        .route("/api/sessions/{id}/select", post(select))
        .route("/api/sessions/{id}/adjust", post(adjust))
        .route("/api/sessions/{id}/metrics", get(metrics))
        .fallback(|uri: Uri| async move {
            ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint").at(&uri)
        })
        .with_state(state);
    let origins: Vec<HeaderValue> = allowed_origins.iter().filter_map(|o| o.parse().ok()).collect();
    if origins.is_empty() {
        api
    } else {
        api.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        )
    }
}

async fn list_scenes(State(st): State<AppState>) -> Json<Value> {
    let scenes: Vec<Value> = st
        .pipeline()
        .scenes()
        .map(|s| {
            json!({
                "id": s.id,
                "objects": s.objects.iter().map(|o| &o.name).collect::<Vec<_>>(),
                "widgets": s.widgets.iter().map(|w| &w.name).collect::<Vec<_>>(),
            })
        })
        .collect();
    Json(Value::Array(scenes))
}

async fn get_scene(State(st): State<AppState>, UrlPath(id): UrlPath<String>, uri: Uri) -> ApiResult<Json<Value>> {
    let scene = st.pipeline().scene(&id).map_err(|e| ApiError::from(e).at(&uri))?;
    Ok(Json(serde_json::to_value(scene.to_document()).expect("scene serializes")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    scene_id: String,
}

async fn create_session(State(st): State<AppState>, uri: Uri, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let run = || -> ApiResult<Value> {
        let b: CreateBody = parse_body(&body)?;
        let stored = StoredSession::new(st.pipeline().create_session(&b.scene_id)?);
        st.store().save(&stored)?;
        Ok(view(&stored))
    };
    run().map(|v| (StatusCode::CREATED, Json(v))).map_err(|e| e.at(&uri))
}

async fn get_session(State(st): State<AppState>, UrlPath(id): UrlPath<String>, uri: Uri) -> ApiResult<Json<Value>> {
    let stored = st.store().load(&id).map_err(|e| ApiError::from(e).at(&uri))?;
    Ok(Json(view(&stored)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextBody {
    text: String,
    #[serde(default)]
    token: Option<String>,
}

async fn instruction(st: State<AppState>, id: UrlPath<String>, uri: Uri, body: Bytes) -> ApiResult<Json<Value>> {
    text_step(st, id, uri, body, false).await
}

async fn answer(st: State<AppState>, id: UrlPath<String>, uri: Uri, body: Bytes) -> ApiResult<Json<Value>> {
    text_step(st, id, uri, body, true).await
}

async fn text_step(
    State(st): State<AppState>,
    UrlPath(id): UrlPath<String>,
    uri: Uri,
    body: Bytes,
    is_answer: bool,
) -> ApiResult<Json<Value>> {
    let b: TextBody = parse_body(&body).map_err(|e| e.at(&uri))?;
    let text = b.text;
    st.mutate(&id, b.token, move |p, s| {
        let outcome = if is_answer {
            p.submit_answer(s, &text)?
        } else {
            p.submit_instruction(s, &text)?
        };
        Ok(serde_json::to_value(outcome).expect("outcome serializes"))
    })
    .await
    .map(|(_, v)| Json(v))
    .map_err(|e| e.at(&uri))
}

async fn candidates(State(st): State<AppState>, UrlPath(id): UrlPath<String>, uri: Uri) -> ApiResult<Json<Value>> {
    let stored = st.store().load(&id).map_err(|e| ApiError::from(e).at(&uri))?;
    let s = &stored.session;
    let names: Vec<&str> = s
        .spec
        .as_ref()
        .map(|spec| spec.active_objectives.iter().map(|k| k.name()).collect())
        .unwrap_or_default();
    let list: Vec<Value> = s
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let objectives: Vec<Value> = c
                .objectives
                .iter()
                .enumerate()
                .map(|(k, v)| json!({ "name": names.get(k).copied().unwrap_or("objective"), "value": v }))
                .collect();
            json!({
                "index": i,
                "layout": c.layout,
                "objectives": objectives,
                "constraints": c.constraints,
                "feasible": c.feasible(),
                "recommended": s.recommended == Some(i),
            })
        })
        .collect();
    Ok(Json(Value::Array(list)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IndexOrAuto {
    Index(usize),
    Word(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectBody {
    index: IndexOrAuto,
    #[serde(default)]
    token: Option<String>,
}

async fn select(State(st): State<AppState>, UrlPath(id): UrlPath<String>, uri: Uri, body: Bytes) -> ApiResult<Json<Value>> {
    let b: SelectBody = parse_body(&body).map_err(|e| e.at(&uri))?;
    let choice = match b.index {
        IndexOrAuto::Index(i) => Choice::Index(i),
        IndexOrAuto::Word(w) if w == "auto" => Choice::Auto,
        IndexOrAuto::Word(w) => {
            let mut e = ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                format!("index must be a number or \"auto\", got \"{w}\""),
            );
            e.path = "index".into();
            return Err(e);
        }
    };
    st.mutate(&id, b.token, move |p, s| {
        let layout = p.finalize(s, choice)?;
        Ok(json!({ "layout": layout }))
    })
    .await
    .map(|(_, v)| Json(v))
    .map_err(|e| e.at(&uri))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjustBody {
    widget: String,
    position: Vec3,
    #[serde(default)]
    token: Option<String>,
}

async fn adjust(State(st): State<AppState>, UrlPath(id): UrlPath<String>, uri: Uri, body: Bytes) -> ApiResult<Json<Value>> {
    let b: AdjustBody = parse_body(&body).map_err(|e| e.at(&uri))?;
    st.mutate(&id, b.token, move |p, s| {
        let m = p.record_adjustment(s, &b.widget, b.position)?;
        Ok(json!({ "metrics": m }))
    })
    .await
    .map(|(_, v)| Json(v))
    .map_err(|e| e.at(&uri))
}

async fn metrics(State(st): State<AppState>, UrlPath(id): UrlPath<String>, uri: Uri) -> ApiResult<Json<Value>> {
    let stored = st.store().load(&id).map_err(|e| ApiError::from(e).at(&uri))?;
    Ok(Json(serde_json::to_value(stored.session.metrics()).expect("metrics serialize")))
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("scene directory {path}: {message}")]
    Scenes { path: String, message: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("server failed: {0}")]
    Runtime(std::io::Error),
}

/// Loads every `*.json` scene in `dir`, sorted by file name.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<Scene>, ServeError> {
    let err = |message: String| ServeError::Scenes { path: dir.display().to_string(), message };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| err(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut scenes = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| err(format!("{}: {e}", f.display())))?;
        scenes.push(load_scene(&text).map_err(|e| err(format!("{}: {e}", f.display())))?);
    }
    if scenes.is_empty() {
        return Err(err("no scene documents found".into()));
    }
    Ok(scenes)
}

pub fn packaged_scenes() -> Vec<Scene> {
    packaged::all()
        .iter()
        .map(|(_, doc)| load_scene(doc).expect("packaged scene is valid"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub port: u16,
    /// Packaged scenes when unset.
    pub scene_dir: Option<PathBuf>,
    pub agents: AgentKind,
    pub data_dir: PathBuf,
    pub allowed_origins: Vec<String>,
    pub settings: PipelineSettings,
}

/// Builds state and router from `config` without binding a port.
pub fn build(config: &ServeConfig) -> Result<Router, ServeError> {
    let scenes = match &config.scene_dir {
        Some(dir) => load_scene_dir(dir)?,
        None => packaged_scenes(),
    };
    let pipeline = Pipeline::new(scenes, backend(config.agents)?, config.settings.clone());
    let state = AppState::new(pipeline, SessionStore::open(&config.data_dir)?);
    Ok(router(state, &config.allowed_origins))
}

/// Serves until the process is stopped. Returns the bind error when the
/// port is taken.
pub async fn serve(config: ServeConfig, ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let app = build(&config)?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
        .await
        .map_err(|source| ServeError::Bind { port: config.port, source })?;
    ready(listener.local_addr().map_err(ServeError::Runtime)?);
    axum::serve(listener, app).await.map_err(ServeError::Runtime)
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServeConfig, ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(ServeError::Runtime)?
        .block_on(serve(config, ready))
}
