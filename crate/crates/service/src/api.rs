//! HTTP API under `/api/v1`.
//!
//! Bodies are JSON in the same shapes as the persisted files (schemas,
//! run configs, manifests, reports); ground truth travels as CSV text.
//! Errors are `{"error": message}` plus `"field"` for validation failures.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use rematch_core::docgen::{attribute_to_doc, table_to_doc, DocMode, Origin};
use rematch_core::pipeline::{validate_guidance_pair, PipelineConfig};
use rematch_core::schema::{dataset_stats, same_name, GroundTruth, MatchPair, Schema, NA};

use crate::jobs::{BackendFactory, JobError, JobManager, JobRecord, JobState};
use crate::store::{to_json, Project, ProjectMeta, Store, StoreError};

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug)]
pub enum ApiError {
    BadRequest { message: String, field: Option<String> },
    NotFound(String),
    Conflict(String),
    BadGateway { message: String, state: JobState },
    Internal(String),
}

impl ApiError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            message: message.into(),
            field: Some(field.to_string()),
        }
    }

    fn bad(message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            message: message.into(),
            field: None,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl From<JobError> for ApiError {
    fn from(e: JobError) -> Self {
        match e {
            JobError::NotFound(_) => ApiError::NotFound(e.to_string()),
            JobError::Busy { .. } | JobError::NotResumable { .. } => ApiError::Conflict(e.to_string()),
            JobError::Store(e) => e.into(),
        }
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], to_json(value)).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::BadRequest { message, field } => {
                let mut body = serde_json::json!({ "error": message });
                if let Some(f) = field {
                    body["field"] = f.into();
                }
                (StatusCode::BAD_REQUEST, body)
            }
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, serde_json::json!({ "error": m })),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, serde_json::json!({ "error": m })),
            ApiError::BadGateway { message, state } => (
                StatusCode::BAD_GATEWAY,
                serde_json::json!({ "error": message, "state": state }),
            ),
            ApiError::Internal(m) => {
                tracing::error!("{m}");
                (StatusCode::INTERNAL_SERVER_ERROR, serde_json::json!({ "error": m }))
            }
        };
        json_response(status, &body)
    }
}

type ApiResult = Result<Response, ApiError>;

pub struct AppState {
    jobs: Arc<JobManager>,
    /// Serializes guidance edits per project.
    project_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

#[derive(Clone)]
pub struct ServiceOptions {
    pub data_dir: PathBuf,
    pub max_active_jobs_per_project: usize,
    pub backends: BackendFactory,
}

impl AppState {
    pub fn open(options: ServiceOptions) -> Result<Arc<Self>, StoreError> {
        let store = Store::open(&options.data_dir)?;
        let jobs = JobManager::open(store, options.backends, options.max_active_jobs_per_project)?;
        Ok(Arc::new(Self {
            jobs: Arc::new(jobs),
            project_locks: Mutex::new(HashMap::new()),
        }))
    }

    fn store(&self) -> &Store {
        self.jobs.store()
    }

    fn project_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.project_locks
            .lock()
            .expect("lock map")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    fn project(&self, id: &str) -> Result<Project, ApiError> {
        self.store()
            .load_project(id)?
            .ok_or_else(|| ApiError::NotFound(format!("project {id} not found")))
    }

    fn job(&self, id: &str) -> Result<JobRecord, ApiError> {
        self.jobs
            .get(id)
            .ok_or_else(|| ApiError::NotFound(format!("run {id} not found")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/runs", post(create_run))
        .route(
            "/projects/{id}/guidance",
            get(list_guidance).post(add_guidance).delete(remove_guidance),
        )
        .route("/projects/{id}/docs/{origin}", get(get_document))
        .route("/runs/{job}", get(get_run))
        .route("/runs/{job}/eval", get(eval_run))
        .route("/runs/{job}/resume", post(resume_run))
        .fallback(|| async { ApiError::NotFound("no such endpoint".into()) });
    Router::new().nest(API_PREFIX, api).with_state(state)
}

/// Serves until Ctrl-C. With `static_dir`, files under it are served for
/// paths outside `/api`.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let mut app = router(state);
    if let Some(dir) = static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tracing::info!("listening on {local}");
    println!("listening on http://{local}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn parse_body(body: &Bytes) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad(format!("invalid JSON body: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaSummary {
    pub name: String,
    pub n_tables: usize,
    pub n_columns: usize,
}

impl SchemaSummary {
    fn of(s: &Schema) -> Self {
        Self {
            name: s.name.clone(),
            n_tables: s.tables.len(),
            n_columns: s.attribute_count(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectSummary {
    #[serde(flatten)]
    pub meta: ProjectMeta,
    pub source: SchemaSummary,
    pub target: SchemaSummary,
    pub has_truth: bool,
    pub guidance: Vec<MatchPair>,
    pub runs: Vec<JobRecord>,
}

fn summary(state: &AppState, p: &Project) -> ProjectSummary {
    ProjectSummary {
        meta: p.meta.clone(),
        source: SchemaSummary::of(&p.source),
        target: SchemaSummary::of(&p.target),
        has_truth: p.truth.is_some(),
        guidance: p.guidance.clone(),
        runs: state.jobs.for_project(&p.meta.id),
    }
}

fn schema_field(body: &Value, field: &str) -> Result<Schema, ApiError> {
    let v = body
        .get(field)
        .ok_or_else(|| ApiError::field(field, format!("missing {field} schema")))?;
    Schema::from_json_str(&v.to_string(), field).map_err(|e| ApiError::field(field, e.to_string()))
}

/// `{"name"?, "source": Schema, "target": Schema, "truth"?: CSV text}`
async fn create_project(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let body = parse_body(&body)?;
    let source = schema_field(&body, "source")?;
    let target = schema_field(&body, "target")?;
    let truth = match body.get("truth") {
        None | Some(Value::Null) => None,
        Some(Value::String(csv)) => {
            let truth = GroundTruth::from_csv_str(csv).map_err(|e| ApiError::field("truth", e.to_string()))?;
            dataset_stats(&source, &truth).map_err(|e| ApiError::field("truth", e.to_string()))?;
            Some(truth)
        }
        Some(_) => return Err(ApiError::field("truth", "truth must be CSV text")),
    };
    let name = match body.get("name") {
        None | Some(Value::Null) => format!("{} -> {}", source.name, target.name),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(ApiError::field("name", "name must be a string")),
    };
    let meta = state.store().create_project(&name, &source, &target, truth.as_ref())?;
    let project = state.project(&meta.id)?;
    Ok(json_response(StatusCode::CREATED, &summary(&state, &project)))
}

async fn list_projects(State(state): State<Arc<AppState>>) -> ApiResult {
    let mut out = Vec::new();
    for id in state.store().project_ids()? {
        out.push(summary(&state, &state.project(&id)?));
    }
    Ok(json_response(StatusCode::OK, &out))
}

async fn get_project(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let project = state.project(&id)?;
    Ok(json_response(StatusCode::OK, &summary(&state, &project)))
}

/// Body: a run config (`j`, `k`, `mode`, `embedder`, `ranker`, ...). The
/// project's stored guidance is used; guidance in the body is rejected.
async fn create_run(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let project = state.project(&id)?;
    let body = if body.is_empty() {
        Value::Object(Default::default())
    } else {
        parse_body(&body)?
    };
    if body.get("guidance").is_some() {
        return Err(ApiError::field(
            "guidance",
            "guidance is managed through the guidance endpoint",
        ));
    }
    let mut config = run_config(body)?;
    config.guidance = project.guidance.clone();
    let job = state.jobs.submit(&project, config)?;
    Ok(json_response(StatusCode::ACCEPTED, &job))
}

/// Overlays the body's keys on the default config, so `{}` means the
/// defaults and `"j": null` switches retrieval off.
fn run_config(body: Value) -> Result<PipelineConfig, ApiError> {
    let Value::Object(fields) = body else {
        return Err(ApiError::bad("run config must be a JSON object"));
    };
    let mut merged = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
    let base = merged.as_object_mut().expect("config is an object");
    for (key, value) in fields {
        if !base.contains_key(&key) {
            return Err(ApiError::field(&key, format!("unknown run setting `{key}`")));
        }
        base.insert(key, value);
    }
    let config: PipelineConfig = serde_json::from_value(merged).map_err(|e| ApiError::bad(e.to_string()))?;
    config.validate().map_err(|e| ApiError::bad(e.to_string()))?;
    Ok(config)
}

/// A job plus, once done, its prediction matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunView {
    #[serde(flatten)]
    pub job: JobRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<rematch_core::PredictionMatrix>,
}

async fn get_run(State(state): State<Arc<AppState>>, Path(job): Path<String>) -> ApiResult {
    let job = state.job(&job)?;
    let result = match job.state {
        JobState::Done => state.store().load_manifest(&job)?.map(|m| m.predictions),
        _ => None,
    };
    Ok(json_response(StatusCode::OK, &RunView { job, result }))
}

async fn resume_run(State(state): State<Arc<AppState>>, Path(job): Path<String>) -> ApiResult {
    state.job(&job)?;
    let job = state.jobs.resume(&job)?;
    Ok(json_response(StatusCode::ACCEPTED, &job))
}

#[derive(Debug, Deserialize)]
struct EvalQuery {
    k: Option<String>,
}

pub fn parse_k_list(text: &str) -> Result<Vec<usize>, String> {
    let ks = text
        .split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("`{s}` is not a positive integer")),
            Ok(k) => Ok(k),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if ks.is_empty() {
        return Err("empty K list".into());
    }
    Ok(ks)
}

async fn eval_run(
    State(state): State<Arc<AppState>>,
    Path(job): Path<String>,
    Query(q): Query<EvalQuery>,
) -> ApiResult {
    let job = state.job(&job)?;
    let ks = match &q.k {
        Some(text) => parse_k_list(text).map_err(|m| ApiError::field("k", m))?,
        None => vec![job.config.top_k],
    };
    match job.state {
        JobState::Done => {}
        JobState::Failed | JobState::Partial => {
            return Err(ApiError::BadGateway {
                message: job.error.clone().unwrap_or_else(|| "run did not complete".into()),
                state: job.state,
            })
        }
        JobState::Queued | JobState::Running => {
            return Err(ApiError::Conflict(format!("run {} is still active", job.id)))
        }
    }
    let project = state.project(&job.project_id)?;
    let truth = project
        .truth
        .ok_or_else(|| ApiError::field("truth", "project has no ground truth"))?;
    let manifest = state
        .store()
        .load_manifest(&job)?
        .ok_or_else(|| ApiError::Internal(format!("run {} has no manifest", job.id)))?;
    let report = manifest
        .predictions
        .evaluate(&truth, &ks)
        .map_err(|e| ApiError::field("k", e.to_string()))?;
    Ok(json_response(StatusCode::OK, &report))
}

async fn list_guidance(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    Ok(json_response(StatusCode::OK, &state.project(&id)?.guidance))
}

fn string_field(body: &Value, field: &str) -> Result<String, ApiError> {
    match body.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) | None | Some(Value::Null) => {
            Err(ApiError::field(field, format!("{field} is required")))
        }
        Some(_) => Err(ApiError::field(field, format!("{field} must be a string"))),
    }
}

/// `{src_table, src_attr, tgt_table, tgt_attr}` validated against the
/// project's schemas, with names canonicalized to schema casing.
fn guidance_pair(project: &Project, body: &Bytes) -> Result<MatchPair, ApiError> {
    let body = parse_body(body)?;
    let fields: Vec<String> = ["src_table", "src_attr", "tgt_table", "tgt_attr"]
        .iter()
        .map(|f| string_field(&body, f))
        .collect::<Result<_, _>>()?;
    if fields[2] == NA || fields[3] == NA {
        return Err(ApiError::field("tgt_table", "NA is not a guidance mapping"));
    }
    let pair = MatchPair::mapped(&fields[0], &fields[1], &fields[2], &fields[3]);
    validate_guidance_pair(&project.source, &project.target, &pair)
        .map_err(|e| ApiError::field(e.field(), e.to_string()))?;
    let src = project.source.table(&fields[0]).expect("validated");
    let tgt = project.target.table(&fields[2]).expect("validated");
    Ok(MatchPair::mapped(
        &src.name,
        &src.attribute(&fields[1]).expect("validated").name,
        &tgt.name,
        &tgt.attribute(&fields[3]).expect("validated").name,
    ))
}

fn same_pair(a: &MatchPair, b: &MatchPair) -> bool {
    a.source().matches(&b.source())
        && match (&a.target, &b.target) {
            (Some(x), Some(y)) => x.matches(y),
            (None, None) => true,
            _ => false,
        }
}

async fn add_guidance(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let lock = state.project_lock(&id);
    let _guard = lock.lock().await;
    let project = state.project(&id)?;
    let pair = guidance_pair(&project, &body)?;
    let mut pairs = project.guidance;
    let status = if pairs.iter().any(|p| same_pair(p, &pair)) {
        StatusCode::OK
    } else {
        pairs.push(pair);
        state.store().save_guidance(&id, &pairs)?;
        StatusCode::CREATED
    };
    Ok(json_response(status, &pairs))
}

async fn remove_guidance(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let lock = state.project_lock(&id);
    let _guard = lock.lock().await;
    let project = state.project(&id)?;
    let pair = guidance_pair(&project, &body)?;
    let mut pairs = project.guidance;
    let before = pairs.len();
    pairs.retain(|p| !same_pair(p, &pair));
    if pairs.len() == before {
        return Err(ApiError::NotFound("guidance pair not stored".into()));
    }
    state.store().save_guidance(&id, &pairs)?;
    Ok(json_response(StatusCode::OK, &pairs))
}

#[derive(Debug, Deserialize)]
struct DocQuery {
    mode: Option<String>,
}

/// Origin is `schema__table` or `schema__table__attribute`; the schema part
/// is the schema name or the literal `source` / `target`.
async fn get_document(
    State(state): State<Arc<AppState>>,
    Path((id, origin)): Path<(String, String)>,
    Query(q): Query<DocQuery>,
) -> ApiResult {
    let project = state.project(&id)?;
    let mode: DocMode = match &q.mode {
        Some(m) => m.parse().map_err(|e: String| ApiError::field("mode", e))?,
        None => DocMode::Full,
    };
    let parsed =
        Origin::parse(&origin).ok_or_else(|| ApiError::field("origin", format!("malformed origin `{origin}`")))?;
    let schema = if same_name(&parsed.schema, "source") || same_name(&parsed.schema, &project.source.name) {
        &project.source
    } else if same_name(&parsed.schema, "target") || same_name(&parsed.schema, &project.target.name) {
        &project.target
    } else {
        return Err(ApiError::NotFound(format!("no schema named {}", parsed.schema)));
    };
    let table = schema
        .table(&parsed.table)
        .ok_or_else(|| ApiError::NotFound(format!("no table {} in {}", parsed.table, schema.name)))?;
    let doc = match &parsed.attribute {
        None => table_to_doc(schema, table, mode),
        Some(a) => {
            let attr = table
                .attribute(a)
                .ok_or_else(|| ApiError::NotFound(format!("no attribute {}.{a}", table.name)))?;
            attribute_to_doc(schema, table, attr, mode)
        }
    };
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        doc.text(),
    )
        .into_response())
}
