use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex};
use std::thread;

use promptad_core::client::Client;
use promptad_core::experiment::{run_ablation_to_dir, RunSpec};
use promptad_core::prompt::PromptTemplate;
use promptad_core::Execution;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunHandle {
    pub run_id: String,
    pub status: RunStatus,
    pub evaluated: usize,
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub(crate) struct Job {
    pub run_id: String,
    pub spec: RunSpec,
    pub template: PromptTemplate,
    pub client: Client,
}

type Handles = Arc<Mutex<BTreeMap<String, RunHandle>>>;

/// Run handles plus the queue of the single background worker.
pub(crate) struct Runs {
    handles: Handles,
    queue: Mutex<mpsc::Sender<Job>>,
}

impl Runs {
    /// Starts the worker. It exits once the registry is dropped.
    pub fn start(runs_root: PathBuf, exec: Execution) -> Self {
        let handles: Handles = Arc::default();
        let (tx, rx) = mpsc::channel::<Job>();
        let worker_handles = handles.clone();
        thread::Builder::new()
            .name("run-worker".into())
            .spawn(move || {
                for job in rx {
                    execute(&worker_handles, &runs_root, exec, job);
                }
            })
            .expect("spawn run worker");
        Self {
            handles,
            queue: Mutex::new(tx),
        }
    }

    pub fn get(&self, run_id: &str) -> Option<RunHandle> {
        self.handles.lock().expect("poisoned").get(run_id).cloned()
    }

    pub fn list(&self) -> Vec<RunHandle> {
        self.handles.lock().expect("poisoned").values().cloned().collect()
    }

    pub fn contains(&self, run_id: &str) -> bool {
        self.handles.lock().expect("poisoned").contains_key(run_id)
    }

    pub fn enqueue(&self, job: Job, total: usize) -> RunHandle {
        let handle = RunHandle {
            run_id: job.run_id.clone(),
            status: RunStatus::Queued,
            evaluated: 0,
            total,
            error: None,
        };
        self.handles
            .lock()
            .expect("poisoned")
            .insert(handle.run_id.clone(), handle.clone());
        if self.queue.lock().expect("poisoned").send(job).is_err() {
            advance(&self.handles, &handle.run_id, RunStatus::Failed, |h| {
                h.error = Some("run worker is gone".into())
            });
        }
        handle
    }
}

/// Moves a handle forward; backward transitions are ignored.
fn advance(handles: &Handles, run_id: &str, to: RunStatus, update: impl FnOnce(&mut RunHandle)) {
    let mut map = handles.lock().expect("poisoned");
    if let Some(h) = map.get_mut(run_id) {
        if to >= h.status && h.status < RunStatus::Done {
            h.status = to;
            update(h);
        }
    }
}

fn execute(handles: &Handles, runs_root: &std::path::Path, exec: Execution, job: Job) {
    advance(handles, &job.run_id, RunStatus::Running, |_| {});
    let progress = |done: usize, total: usize| {
        advance(handles, &job.run_id, RunStatus::Running, |h| {
            h.evaluated = h.evaluated.max(done);
            h.total = total;
        })
    };
    let result = run_ablation_to_dir(
        &job.spec,
        &job.template,
        job.client.config(),
        &job.client,
        runs_root,
        Some(&job.run_id),
        exec,
        Some(&progress),
    );
    match result {
        Ok(_) => {
            tracing::info!(run_id = %job.run_id, "run finished");
            advance(handles, &job.run_id, RunStatus::Done, |h| h.evaluated = h.total);
        }
        Err(e) => {
            tracing::warn!(run_id = %job.run_id, error = %e, "run failed");
            advance(handles, &job.run_id, RunStatus::Failed, |h| h.error = Some(e.to_string()));
        }
    }
}
