//! JSON-over-HTTP front end for campaigns.
//!
//! | method | path                           | success | errors          |
//! |--------|--------------------------------|---------|-----------------|
//! | GET    | `/campaigns`                   | 200     |                 |
//! | POST   | `/campaigns`                   | 201     | 422             |
//! | GET    | `/campaigns/{id}`              | 200     | 404             |
//! | GET    | `/campaigns/{id}/state`        | 200     | 404             |
//! | POST   | `/campaigns/{id}/advance`      | 202     | 404, 409        |
//! | GET    | `/campaigns/{id}/candidates`   | 200     | 404, 409        |
//! | POST   | `/campaigns/{id}/selection`    | 200     | 404, 409, 422, 423 |
//! | POST   | `/campaigns/{id}/rounds`       | 202     | 404, 409, 422, 423 |
//! | GET    | `/campaigns/{id}/report`       | 200     | 404, 409        |
//!
//! Long operations run on the blocking pool; poll `GET /campaigns/{id}` for
//! the job's progress. Errors are `{"error": {"code", "message"}}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::campaign::{Campaign, CampaignConfig, CampaignError, RoundOptions, SelectionInput, Services, Stage};
use crate::evaluator::VirtlabEvaluator;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError { status, code: code.to_string(), message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    fn body(&self) -> ErrorBody {
        ErrorBody { code: self.code.clone(), message: self.message.clone() }
    }
}

/// HTTP status for each campaign error.
pub fn status_for(e: &CampaignError) -> StatusCode {
    match e.code() {
        "not_found" => StatusCode::NOT_FOUND,
        "wrong_stage" | "no_rounds" | "already_exists" => StatusCode::CONFLICT,
        "campaign_locked" => StatusCode::LOCKED,
        "unknown_candidate" | "role_constraint_violated" | "invalid_selection" | "invalid_config" => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        "malformed_output" | "gateway_error" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<CampaignError> for ApiError {
    fn from(e: CampaignError) -> ApiError {
        ApiError::new(status_for(&e), e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.body() }))).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// The latest background operation on a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub kind: String,
    pub running: bool,
    pub done: usize,
    pub total: usize,
    pub error: Option<ErrorBody>,
}

impl Job {
    fn progress(&self) -> f64 {
        match self.total {
            0 if self.running => 0.0,
            0 => 1.0,
            t => self.done as f64 / t as f64,
        }
    }
}

struct Inner {
    root: PathBuf,
    workers: usize,
    jobs: Mutex<HashMap<String, Job>>,
    create: Mutex<()>,
}

/// Shared server state: the campaigns root and the job table.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(root: PathBuf, workers: usize) -> std::io::Result<AppState> {
        std::fs::create_dir_all(&root)?;
        Ok(AppState {
            inner: Arc::new(Inner {
                root,
                workers: workers.max(1),
                jobs: Mutex::new(HashMap::new()),
                create: Mutex::new(()),
            }),
        })
    }

    fn campaign_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.inner.root)
            .into_iter()
            .flatten()
            .flatten()
            .filter(|e| e.path().join("state.json").exists())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| valid_id(n))
            .collect();
        ids.sort();
        ids
    }

    fn open(&self, id: &str) -> Result<Campaign, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no campaign {id}")));
        }
        Campaign::open(&self.inner.root.join(id)).map_err(|e| match e {
            CampaignError::NotFound(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no campaign {id}"))
            }
            e => e.into(),
        })
    }

    fn job(&self, id: &str) -> Option<Job> {
        self.inner.jobs.lock().expect("job table").get(id).cloned()
    }

    fn set_progress(&self, id: &str, done: usize, total: usize) {
        if let Some(j) = self.inner.jobs.lock().expect("job table").get_mut(id) {
            j.done = done;
            j.total = total;
        }
    }

    /// Registers a job unless one is already running; runs `work` on the
    /// blocking pool.
    fn start_job<F>(&self, id: &str, kind: &str, work: F) -> bool
    where
        F: FnOnce(&AppState) -> Result<(), CampaignError> + Send + 'static,
    {
        {
            let mut jobs = self.inner.jobs.lock().expect("job table");
            if jobs.get(id).is_some_and(|j| j.running) {
                return false;
            }
            jobs.insert(id.to_string(), Job { kind: kind.to_string(), running: true, done: 0, total: 0, error: None });
        }
        let app = self.clone();
        let id = id.to_string();
        tokio::task::spawn_blocking(move || {
            let outcome = work(&app);
            let mut jobs = app.inner.jobs.lock().expect("job table");
            if let Some(j) = jobs.get_mut(&id) {
                j.running = false;
                if j.total == 0 {
                    j.done = 1;
                    j.total = 1;
                }
                j.error = outcome.err().map(|e| ApiError::from(e).body());
            }
        });
        true
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/campaigns", get(list_campaigns).post(create_campaign))
        .route("/campaigns/{id}", get(snapshot))
        .route("/campaigns/{id}/state", get(raw_state))
        .route("/campaigns/{id}/advance", post(advance))
        .route("/campaigns/{id}/candidates", get(candidates))
        .route("/campaigns/{id}/selection", post(selection))
        .route("/campaigns/{id}/rounds", post(rounds))
        .route("/campaigns/{id}/report", get(report))
        .with_state(state)
}

pub async fn serve(addr: &str, root: PathBuf, workers: usize) -> std::io::Result<()> {
    let app = router(AppState::new(root, workers)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn list_campaigns(State(app): State<AppState>) -> Json<Value> {
    Json(json!({ "campaigns": app.campaign_ids() }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    requirement: String,
    config: serde_json::Map<String, Value>,
}

async fn create_campaign(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let mut raw = req.config;
    raw.insert("requirement".into(), Value::String(req.requirement));
    let mut config: CampaignConfig = serde_json::from_value(Value::Object(raw))
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_config", e.to_string()))?;
    let cwd = std::env::current_dir().map_err(|e| CampaignError::io(std::path::Path::new("."), e))?;
    config.resolve_paths(&cwd);

    let _guard = app.inner.create.lock().expect("create lock");
    let next = app
        .campaign_ids()
        .iter()
        .filter_map(|id| id.strip_prefix('c').and_then(|n| n.parse::<u32>().ok()))
        .max()
        .unwrap_or(0)
        + 1;
    let id = format!("c{next:04}");
    let campaign = Campaign::create(&app.inner.root.join(&id), config)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "stage": campaign.stage(), "version": campaign.state().version }))))
}

fn snapshot_value(app: &AppState, c: &Campaign) -> Value {
    let id = c.id();
    let s = c.state();
    let job = app.job(&id);
    let threshold = c.config().reagent_threshold;
    json!({
        "id": id,
        "version": s.version,
        "stage": s.stage,
        "requirement": c.config().requirement,
        "keywords": s.keywords,
        "articles_retrieved": s.articles.len(),
        "relevant_articles": s.relevant_articles.len(),
        "candidates": s.candidates.as_ref().map(|l| l.len()),
        "highlighted": s.candidates.as_ref().map(|l| l.highlighted(threshold).len()),
        "mining": s.mining,
        "selection": s.selection,
        "rounds_completed": s.completed_count(),
        "rounds_planned": c.config().rounds,
        "best_so_far": s.best_so_far(),
        "open_round": s.open_round().map(|r| json!({ "round": r.index, "status": r.status, "error": r.error })),
        "progress": job.as_ref().map_or(0.0, Job::progress),
        "job": job,
    })
}

async fn snapshot(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let c = app.open(&id)?;
    Ok(Json(snapshot_value(&app, &c)))
}

async fn raw_state(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let c = app.open(&id)?;
    Ok(Json(serde_json::to_value(c.state()).expect("json")))
}

async fn advance(State(app): State<AppState>, Path(id): Path<String>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let c = app.open(&id)?;
    let running = app.job(&id).is_some_and(|j| j.running);
    if !running {
        if let s @ (Stage::Feedback | Stage::Execution | Stage::Done) = c.stage() {
            return Err(ApiError::new(StatusCode::CONFLICT, "wrong_stage", format!("nothing to advance at stage {s}")));
        }
        let workers = app.inner.workers;
        let mut campaign = c.clone();
        app.start_job(&id, "advance", move |_| {
            let services = Services::from_config(campaign.config(), workers)?;
            campaign.advance(&services).map(|_| ())
        });
    }
    Ok((StatusCode::ACCEPTED, Json(snapshot_value(&app, &c))))
}

#[derive(Deserialize)]
struct CandidateQuery {
    #[serde(default)]
    all: bool,
}

async fn candidates(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<CandidateQuery>,
) -> Result<Json<Value>, ApiError> {
    let c = app.open(&id)?;
    let list = c.state().candidates.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "wrong_stage", format!("no candidates at stage {}", c.stage()))
    })?;
    let shown = if q.all { list.clone() } else { list.highlighted(c.config().reagent_threshold) };
    Ok(Json(serde_json::to_value(shown).expect("json")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionRequest {
    selections: Vec<SelectionInput>,
}

async fn selection(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let mut c = app.open(&id)?;
    let req: SelectionRequest = parse_body(&body)?;
    let selection = c.submit_selection(&req.selections)?.clone();
    Ok(Json(json!({ "stage": c.stage(), "version": c.state().version, "selection": selection })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RoundsRequest {
    #[serde(default = "one")]
    count: usize,
    #[serde(default)]
    beta_override: Option<f64>,
}

fn one() -> usize {
    1
}

async fn rounds(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let c = app.open(&id)?;
    let req: RoundsRequest =
        if body.is_empty() { RoundsRequest { count: 1, beta_override: None } } else { parse_body(&body)? };
    if req.count == 0 {
        return Err(ApiError::bad_request("count must be at least 1"));
    }
    if let Some(b) = req.beta_override {
        if !(b.is_finite() && b >= 0.0) {
            return Err(ApiError::bad_request("beta_override must be finite and nonnegative"));
        }
    }
    if c.stage() != Stage::Execution {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "wrong_stage",
            format!("rounds need the execution stage (campaign is at {})", c.stage()),
        ));
    }
    let workers = app.inner.workers;
    let mut campaign = c.clone();
    let job_id = id.clone();
    let started = app.start_job(&id, "rounds", move |app| {
        let evaluator = VirtlabEvaluator::from_config(campaign.config());
        let progress = |done: usize, total: usize| app.set_progress(&job_id, done, total);
        let opts = RoundOptions { beta_override: req.beta_override, workers, progress: Some(&progress) };
        for _ in 0..req.count {
            campaign.run_round(&evaluator, &opts)?;
            if campaign.stage() == Stage::Done {
                break;
            }
        }
        Ok(())
    });
    if !started {
        return Err(ApiError::new(StatusCode::LOCKED, "campaign_locked", "another operation is running"));
    }
    Ok((StatusCode::ACCEPTED, Json(snapshot_value(&app, &c))))
}

async fn report(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let c = app.open(&id)?;
    let report = c.report()?;
    Ok(Json(serde_json::to_value(report).expect("json")))
}
