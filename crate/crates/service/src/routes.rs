use std::fs;
use std::path::PathBuf;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use promptad_core::client::Mode;
use promptad_core::eval::{AblationRow, ScoredRecord};
use promptad_core::experiment::{
    check_run_id, default_run_id, read_manifest, read_records, read_rows, RunManifest, RunSpec,
};
use promptad_core::prompt::{compose, AblationConfig, PromptTemplate, Scenario, SectionKind};
use promptad_core::refine::{refine, RefinementProposal, RefinementRequest};
use serde::{Deserialize, Serialize};

use crate::runs::{Job, RunHandle, RunStatus};
use crate::{ApiError, AppState};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/template", get(get_template).put(put_template))
        .route("/template/history", get(template_history))
        .route("/template/history/{version}", get(template_version))
        .route("/refine", post(post_refine))
        .route("/proposals", get(list_proposals))
        .route("/proposals/{id}", get(get_proposal))
        .route("/proposals/{id}/approve", post(approve_proposal))
        .route("/proposals/{id}/reject", post(reject_proposal))
        .route("/runs", get(list_runs).post(post_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/records", get(run_records))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config().token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

/// `Json` with rejections rendered as `{"error": ...}` with status 400.
struct Body<T>(T);

impl<S, T> FromRequest<S> for Body<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ApiError::bad_request(e.body_text())),
        }
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

// ---- templates

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionInfo {
    pub version: u64,
    pub provenance: String,
}

async fn get_template(State(state): State<AppState>) -> Json<PromptTemplate> {
    Json(state.shared.store.lock().expect("poisoned").current().clone())
}

async fn put_template(
    State(state): State<AppState>,
    Body(template): Body<PromptTemplate>,
) -> Result<Json<PromptTemplate>, ApiError> {
    let mut store = state.shared.store.lock().expect("poisoned");
    Ok(Json(store.replace(template, "edited via API")?.clone()))
}

async fn template_history(State(state): State<AppState>) -> Json<Vec<VersionInfo>> {
    let store = state.shared.store.lock().expect("poisoned");
    Json(
        store
            .history()
            .iter()
            .map(|t| VersionInfo {
                version: t.version,
                provenance: t.provenance.clone(),
            })
            .collect(),
    )
}

async fn template_version(
    State(state): State<AppState>,
    Path(version): Path<u64>,
) -> Result<Json<PromptTemplate>, ApiError> {
    let store = state.shared.store.lock().expect("poisoned");
    Ok(Json(store.get(version)?.clone()))
}

// ---- refinement

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineBody {
    pub notes: String,
    pub target_sections: Vec<SectionKind>,
    #[serde(default)]
    pub guidelines: Option<String>,
}

#[derive(Serialize)]
struct Approved {
    proposal: RefinementProposal,
    template: PromptTemplate,
}

async fn post_refine(
    State(state): State<AppState>,
    Body(body): Body<RefineBody>,
) -> Result<(StatusCode, Json<RefinementProposal>), ApiError> {
    let proposal = blocking(move || {
        if let Some(p) = state.shared.proposals.lock().expect("poisoned").pending() {
            return Err(ApiError::conflict(format!("proposal {} is still pending", p.id)));
        }
        let current = state.shared.store.lock().expect("poisoned").current().clone();
        let mut request = RefinementRequest::new(body.notes, current, body.target_sections);
        request.guidelines = body.guidelines;
        request.validate()?;
        let proposal = refine(&state.preprocessor()?, &request)?;
        let mut book = state.shared.proposals.lock().expect("poisoned");
        Ok(book.submit(proposal)?.clone())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(proposal)))
}

async fn list_proposals(State(state): State<AppState>) -> Json<Vec<RefinementProposal>> {
    Json(state.shared.proposals.lock().expect("poisoned").all().to_vec())
}

async fn get_proposal(
    State(state): State<AppState>,
    Path(id): Path<u64>,
) -> Result<Json<RefinementProposal>, ApiError> {
    Ok(Json(state.shared.proposals.lock().expect("poisoned").get(id)?.clone()))
}

async fn approve_proposal(State(state): State<AppState>, Path(id): Path<u64>) -> Result<Json<Approved>, ApiError> {
    let mut book = state.shared.proposals.lock().expect("poisoned");
    let mut store = state.shared.store.lock().expect("poisoned");
    let template = book.approve_and_apply(id, &mut store)?.clone();
    Ok(Json(Approved {
        proposal: book.get(id)?.clone(),
        template,
    }))
}

async fn reject_proposal(
    State(state): State<AppState>,
    Path(id): Path<u64>,
) -> Result<Json<RefinementProposal>, ApiError> {
    let mut book = state.shared.proposals.lock().expect("poisoned");
    Ok(Json(book.reject(id)?.clone()))
}

// ---- runs

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRequest {
    pub scenario: Scenario,
    /// Config keys such as `few3+ti-oi-ci`; empty means the scenario defaults.
    #[serde(default)]
    pub configs: Vec<String>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub reference_ids: Option<Vec<String>>,
    #[serde(default)]
    pub run_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunView {
    #[serde(flatten)]
    pub handle: RunHandle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<AblationRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

#[derive(Debug, Deserialize)]
struct RecordsQuery {
    filter: Option<String>,
}

impl AppState {
    fn runs_root(&self) -> &std::path::Path {
        &self.shared.config.runs_root
    }

    fn run_taken(&self, run_id: &str) -> bool {
        self.shared.runs.contains(run_id) || self.runs_root().join(run_id).exists()
    }

    /// Handle of a run known to this process, or of a finished run on disk.
    fn run_handle(&self, run_id: &str) -> Result<RunHandle, ApiError> {
        if let Some(h) = self.shared.runs.get(run_id) {
            return Ok(h);
        }
        let total = read_rows(self.runs_root(), run_id)?
            .iter()
            .map(|r| (r.confusion.total() + r.unparseable) as usize)
            .sum();
        Ok(RunHandle {
            run_id: run_id.to_string(),
            status: RunStatus::Done,
            evaluated: total,
            total,
            error: None,
        })
    }

    fn start_run(&self, req: RunRequest) -> Result<RunHandle, ApiError> {
        let data_root: PathBuf = self
            .shared
            .config
            .data_roots
            .get(&req.scenario)
            .cloned()
            .ok_or_else(|| ApiError::bad_request(format!("no dataset configured for {}", req.scenario)))?;
        let configs = req
            .configs
            .iter()
            .map(|k| k.parse::<AblationConfig>())
            .collect::<Result<Vec<_>, _>>()?;
        let spec = RunSpec {
            scenario: req.scenario,
            data_root,
            configs,
            reference_ids: req.reference_ids,
        };
        let dataset = spec.load_dataset()?;
        let template = self.shared.store.lock().expect("poisoned").current().clone();
        let samples = dataset.eval_samples();
        let first = samples
            .first()
            .ok_or_else(|| ApiError::bad_request("dataset has no test samples"))?;
        let with_refs = dataset.attach_references(&template);
        for config in spec.configs() {
            compose(&with_refs, &config, &first.payload)?;
        }
        let client = self.detector(req.mode)?;
        let total = samples.len() * spec.configs().len();

        let _launch = self.shared.launch.lock().expect("poisoned");
        let run_id = match req.run_id {
            Some(id) => {
                check_run_id(&id)?;
                if self.run_taken(&id) {
                    return Err(ApiError::conflict(format!("run {id} already exists")));
                }
                id
            }
            None => {
                let base = default_run_id(&spec, &template, client.config(), &dataset);
                let mut id = base.clone();
                let mut n = 2;
                while self.run_taken(&id) {
                    id = format!("{base}-{n}");
                    n += 1;
                }
                id
            }
        };
        let job = Job {
            run_id,
            spec,
            template,
            client,
        };
        Ok(self.shared.runs.enqueue(job, total))
    }
}

async fn post_run(
    State(state): State<AppState>,
    Body(req): Body<RunRequest>,
) -> Result<(StatusCode, Json<RunHandle>), ApiError> {
    let handle = blocking(move || state.start_run(req)).await?;
    Ok((StatusCode::ACCEPTED, Json(handle)))
}

async fn list_runs(State(state): State<AppState>) -> Result<Json<Vec<RunHandle>>, ApiError> {
    blocking(move || {
        let mut handles = state.shared.runs.list();
        if let Ok(entries) = fs::read_dir(state.runs_root()) {
            let mut on_disk: Vec<String> = entries
                .filter_map(|e| e.ok())
                .filter(|e| e.path().join("manifest.json").is_file())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter(|id| !state.shared.runs.contains(id))
                .collect();
            on_disk.sort();
            for id in on_disk {
                if let Ok(h) = state.run_handle(&id) {
                    handles.push(h);
                }
            }
        }
        handles.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        Ok(Json(handles))
    })
    .await
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<RunView>, ApiError> {
    blocking(move || {
        let handle = state.run_handle(&id)?;
        let (rows, manifest) = if handle.status == RunStatus::Done {
            (
                Some(read_rows(state.runs_root(), &id)?),
                Some(read_manifest(state.runs_root(), &id)?),
            )
        } else {
            (None, None)
        };
        Ok(Json(RunView { handle, rows, manifest }))
    })
    .await
}

async fn run_records(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RecordsQuery>,
) -> Result<Json<Vec<ScoredRecord>>, ApiError> {
    let misclassified = match q.filter.as_deref() {
        None | Some("all") => false,
        Some("misclassified") => true,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "filter must be 'all' or 'misclassified', got {other:?}"
            )))
        }
    };
    blocking(move || {
        let handle = state.run_handle(&id)?;
        if handle.status != RunStatus::Done {
            return Err(ApiError::conflict(format!("run {id} is {:?}", handle.status)));
        }
        Ok(Json(read_records(state.runs_root(), &id, misclassified)?))
    })
    .await
}
