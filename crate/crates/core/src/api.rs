//! REST service: sessions, evolution steps, saved transformations and models.
//!
//! Sessions live in server memory, addressed by id, and expire after a
//! period of inactivity. Every mutation of one session runs under that
//! session's lock on the blocking pool; distinct sessions never contend.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::codegen::emit_shader;
use crate::evolution::{EvolutionError, EvolutionParams, Session};
use crate::expr;
use crate::store::{Mesh, MeshModel, Store, StoreError, TransformationRecord};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(2 * 60 * 60);
/// Upper bound on `population_size` accepted from clients.
pub const MAX_POPULATION: usize = 10_000;
/// Upper bound on `generations` per step request.
pub const MAX_GENERATIONS_PER_STEP: u32 = 1_000;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    error: &'static str,
    detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        ApiError { status, error, detail: detail.into() }
    }

    fn unprocessable(error: &'static str, detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, error, detail)
    }

    fn not_found(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", detail)
    }

    fn internal(detail: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, detail = %self.detail, "request failed");
        }
        let body = ErrorBody { error: self.error.to_string(), detail: self.detail };
        (self.status, Json(body)).into_response()
    }
}

impl From<EvolutionError> for ApiError {
    fn from(e: EvolutionError) -> Self {
        let code = match e {
            EvolutionError::InvalidParams(_) => "invalid_params",
            EvolutionError::InvalidSelection(_) | EvolutionError::ZeroGenerations => "invalid_request",
            EvolutionError::Inject(_) => "invalid_expression",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Validation(_) => ApiError::unprocessable("validation_failed", e.to_string()),
            StoreError::NotFound { .. } => ApiError::not_found(e.to_string()),
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string())
            }
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Decodes a JSON body. Empty bodies decode as `{}`.
fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => ApiError::unprocessable("invalid_request", e.to_string()),
        _ => ApiError::new(StatusCode::BAD_REQUEST, "malformed_json", e.to_string()),
    })
}

/// One display slot as sent to the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub slot: usize,
    pub expr: String,
    pub sexpr: String,
    pub glsl: String,
    pub dynamic: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub generation: u64,
    pub candidates: Vec<CandidateView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisplaySet {
    pub generation: u64,
    pub candidates: Vec<CandidateView>,
}

/// Client-overridable subset of [`EvolutionParams`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub population_size: Option<usize>,
    pub subset_size: Option<usize>,
    pub crossover_prob: Option<f64>,
    pub mutation_prob: Option<f64>,
    pub tournament_size: Option<usize>,
    pub seed: Option<u64>,
}

impl ParamOverrides {
    fn apply(self) -> ApiResult<EvolutionParams> {
        let d = EvolutionParams::default();
        let params = EvolutionParams {
            population_size: self.population_size.unwrap_or(d.population_size),
            subset_size: self.subset_size.unwrap_or(d.subset_size),
            crossover_prob: self.crossover_prob.unwrap_or(d.crossover_prob),
            mutation_prob: self.mutation_prob.unwrap_or(d.mutation_prob),
            tournament_size: self.tournament_size.unwrap_or(d.tournament_size),
            seed: self.seed.unwrap_or_else(rand::random),
            lattice: d.lattice,
        };
        if params.population_size > MAX_POPULATION {
            return Err(ApiError::unprocessable(
                "invalid_params",
                format!("population_size must not exceed {MAX_POPULATION}"),
            ));
        }
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSessionRequest {
    #[serde(default)]
    params: Option<ParamOverrides>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    #[serde(default)]
    selected_slots: Vec<usize>,
    #[serde(default = "one")]
    generations: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaveRequest {
    slot: usize,
    name: String,
    #[serde(default)]
    model_id: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedRequest {
    transformation_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelUpload {
    name: String,
    vertices: Vec<f64>,
    indices: Vec<u32>,
    #[serde(default)]
    normals: Option<Vec<f64>>,
}

struct SessionEntry {
    last_used: Mutex<Instant>,
    session: Mutex<Session>,
}

pub struct AppState {
    store: Arc<Store>,
    sessions: Mutex<HashMap<String, Arc<SessionEntry>>>,
    session_ttl: Duration,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        AppState::with_session_ttl(store, DEFAULT_SESSION_TTL)
    }

    pub fn with_session_ttl(store: Store, session_ttl: Duration) -> Self {
        AppState { store: Arc::new(store), sessions: Mutex::new(HashMap::new()), session_ttl }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session registry poisoned").len()
    }

    /// Drops sessions idle for longer than the TTL. Returns how many went.
    pub fn evict_idle(&self) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.lock().expect("session registry poisoned");
        let before = sessions.len();
        sessions.retain(|_, entry| {
            let last = *entry.last_used.lock().expect("session clock poisoned");
            now.duration_since(last) <= self.session_ttl
        });
        before - sessions.len()
    }

    fn insert(&self, session: Session) -> String {
        let id = session.id.clone();
        let entry = SessionEntry { last_used: Mutex::new(Instant::now()), session: Mutex::new(session) };
        self.sessions.lock().expect("session registry poisoned").insert(id.clone(), Arc::new(entry));
        id
    }

    fn lookup(&self, id: &str) -> ApiResult<Arc<SessionEntry>> {
        self.evict_idle();
        let sessions = self.sessions.lock().expect("session registry poisoned");
        let entry = sessions.get(id).cloned().ok_or_else(|| ApiError::not_found(format!("session `{id}` not found")))?;
        *entry.last_used.lock().expect("session clock poisoned") = Instant::now();
        Ok(entry)
    }
}

/// Runs `f` on the session under its lock, off the async executor.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> ApiResult<T> + Send + 'static,
{
    let entry = state.lookup(id)?;
    tokio::task::spawn_blocking(move || {
        let mut session = entry.session.lock().map_err(|_| ApiError::internal("session lock poisoned"))?;
        f(&mut session)
    })
    .await
    .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub fn candidates(session: &Session) -> Vec<CandidateView> {
    session
        .displayed_exprs()
        .enumerate()
        .map(|(slot, e)| {
            let art = emit_shader(e);
            CandidateView {
                slot,
                expr: art.expr_text,
                sexpr: art.expr_sexpr,
                glsl: art.glsl_source,
                dynamic: art.dynamic,
            }
        })
        .collect()
}

fn display_set(session: &Session) -> DisplaySet {
    DisplaySet { generation: session.generation, candidates: candidates(session) }
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateSessionRequest = parse_body(&body)?;
    let params = req.params.unwrap_or_default().apply()?;
    state.evict_idle();
    let session = tokio::task::spawn_blocking(move || Session::init(params))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))??;
    let response = SessionCreated {
        session_id: session.id.clone(),
        generation: session.generation,
        candidates: candidates(&session),
    };
    state.insert(session);
    Ok((StatusCode::CREATED, Json(response)))
}

async fn step_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<DisplaySet>> {
    let req: StepRequest = parse_body(&body)?;
    if req.generations > MAX_GENERATIONS_PER_STEP {
        return Err(ApiError::unprocessable(
            "invalid_request",
            format!("generations must not exceed {MAX_GENERATIONS_PER_STEP}"),
        ));
    }
    let set = with_session(&state, &id, move |s| {
        s.step(&req.selected_slots, req.generations)?;
        Ok(display_set(s))
    })
    .await?;
    Ok(Json(set))
}

async fn save_slot(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    let req: SaveRequest = parse_body(&body)?;
    let slot = req.slot;
    let sexpr = with_session(&state, &id, move |s| {
        s.displayed(slot).map(expr::serialize).ok_or_else(|| {
            ApiError::unprocessable("invalid_request", format!("slot {slot} is outside 0..{}", s.display.len()))
        })
    })
    .await?;
    let store = state.store.clone();
    let record = tokio::task::spawn_blocking(move || store.save_transformation(&req.name, &sexpr, req.model_id))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn seed_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<DisplaySet>> {
    let req: SeedRequest = parse_body(&body)?;
    // Session existence is checked first so an unknown session is 404 regardless of the record.
    state.lookup(&id)?;
    let record = state.store.get_transformation(&req.transformation_id)?;
    let tree = expr::deserialize(&record.expr)
        .map_err(|e| ApiError::internal(format!("stored expression does not parse: {e}")))?;
    let set = with_session(&state, &id, move |s| {
        s.inject(tree)?;
        Ok(display_set(s))
    })
    .await?;
    Ok(Json(set))
}

async fn list_transformations(State(state): State<Arc<AppState>>) -> Json<Vec<TransformationRecord>> {
    Json(state.store.list_transformations())
}

async fn get_transformation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<TransformationRecord>> {
    Ok(Json(state.store.get_transformation(&id)?))
}

async fn upload_model(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: ModelUpload = parse_body(&body)?;
    let mesh = Mesh { vertices: req.vertices, indices: req.indices, normals: req.normals };
    let store = state.store.clone();
    let model = tokio::task::spawn_blocking(move || store.save_model(&req.name, mesh))
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))??;
    Ok((StatusCode::CREATED, Json(model)))
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<MeshModel>> {
    Json(state.store.list_models())
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<MeshModel>> {
    Ok(Json(state.store.get_model(&id)?))
}

async fn unknown_route() -> ApiError {
    ApiError::not_found("no such route")
}

/// All API routes plus CORS. `static_dir`, when set, is served for every
/// path the API does not claim.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/step", post(step_session))
        .route("/api/sessions/{id}/save", post(save_slot))
        .route("/api/sessions/{id}/seed", post(seed_session))
        .route("/api/transformations", get(list_transformations))
        .route("/api/transformations/{id}", get(get_transformation))
        .route("/api/models", get(list_models).post(upload_model))
        .route("/api/models/{id}", get(get_model))
        .route("/api/{*rest}", axum::routing::any(unknown_route));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(unknown_route),
    };
    app.with_state(state).layer(CorsLayer::permissive())
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub session_ttl: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("./data"),
            static_dir: None,
            session_ttl: DEFAULT_SESSION_TTL,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store, binds `0.0.0.0:<port>` and serves until the process ends.
pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let store = Store::open(&config.data_dir)?;
    let state = Arc::new(AppState::with_session_ttl(store, config.session_ttl));
    let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { port: config.port, source })?;
    tracing::info!(%addr, data_dir = %config.data_dir.display(), "listening");

    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let evicted = sweeper.evict_idle();
            if evicted > 0 {
                tracing::debug!(evicted, "expired idle sessions");
            }
        }
    });

    axum::serve(listener, router(state, config.static_dir)).await?;
    Ok(())
}
