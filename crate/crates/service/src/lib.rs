//! HTTP facade over the core library for the prompt workbench and scripts.
//!
//! One process serves one template lineage. Evaluation runs go through a
//! queue drained by a single background worker; clients poll `/runs/{id}`.

mod error;
mod routes;
mod runs;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use promptad_core::client::{Backend, Client, ClientError, Mode, ModelConfig};
use promptad_core::prompt::{load_preset, PromptError, Scenario, TemplateStore};
use promptad_core::refine::ProposalBook;
use promptad_core::Execution;

pub use error::ApiError;
pub use routes::{RefineBody, RunRequest, RunView, VersionInfo};
pub use runs::{RunHandle, RunStatus};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Run directories are written below this root.
    pub runs_root: PathBuf,
    /// Template version files; `None` keeps versions in memory only.
    pub template_dir: Option<PathBuf>,
    /// Preset used as version 1 when the template store is empty.
    pub initial_scenario: Scenario,
    /// Dataset location per scenario, as accepted by `dataset::load`.
    pub data_roots: HashMap<Scenario, PathBuf>,
    pub detector: ModelConfig,
    pub preprocessor: ModelConfig,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
    pub exec: Execution,
}

impl ServiceConfig {
    pub fn new(runs_root: impl Into<PathBuf>, initial_scenario: Scenario) -> Self {
        Self {
            runs_root: runs_root.into(),
            template_dir: None,
            initial_scenario,
            data_roots: HashMap::new(),
            detector: ModelConfig::default(),
            preprocessor: ModelConfig::preprocessor(),
            token: None,
            exec: Execution::default(),
        }
    }
}

/// Model backends to use instead of HTTP; meant for tests and demos.
#[derive(Clone, Default)]
pub struct Backends {
    pub detector: Option<Arc<dyn Backend>>,
    pub preprocessor: Option<Arc<dyn Backend>>,
}

#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

struct Shared {
    config: ServiceConfig,
    backends: Backends,
    store: Mutex<TemplateStore>,
    proposals: Mutex<ProposalBook>,
    runs: runs::Runs,
    /// Serialises run id selection with enqueueing.
    launch: Mutex<()>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, PromptError> {
        Self::with_backends(config, Backends::default())
    }

    pub fn with_backends(config: ServiceConfig, backends: Backends) -> Result<Self, PromptError> {
        let initial = load_preset(config.initial_scenario);
        let store = match &config.template_dir {
            Some(dir) => TemplateStore::open(dir, initial)?,
            None => TemplateStore::in_memory(initial)?,
        };
        let runs = runs::Runs::start(config.runs_root.clone(), config.exec);
        Ok(Self {
            shared: Arc::new(Shared {
                config,
                backends,
                store: Mutex::new(store),
                proposals: Mutex::new(ProposalBook::new()),
                runs,
                launch: Mutex::new(()),
            }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.shared.config
    }

    fn client(config: &ModelConfig, backend: &Option<Arc<dyn Backend>>) -> Result<Client, ClientError> {
        match backend {
            Some(b) => Client::with_backend(config.clone(), b.clone()),
            None => Client::new(config.clone()),
        }
    }

    fn detector(&self, mode: Option<Mode>) -> Result<Client, ClientError> {
        let mut config = self.shared.config.detector.clone();
        if let Some(mode) = mode {
            config.mode = mode;
        }
        Self::client(&config, &self.shared.backends.detector)
    }

    fn preprocessor(&self) -> Result<Client, ClientError> {
        Self::client(&self.shared.config.preprocessor, &self.shared.backends.preprocessor)
    }
}

pub use routes::router;

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr().ok(), "listening");
    axum::serve(listener, router(state)).await
}
