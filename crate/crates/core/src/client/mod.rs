//! Chat-completions client for the detector and pre-processor models.
//!
//! Three modes share one code path: `Live` talks to the endpoint, `Record`
//! additionally stores every response under its request fingerprint, and
//! `Replay` answers exclusively from that cache and never touches the network.

mod backend;
mod cache;
mod detect;
mod http;
mod limiter;
mod request;
mod verdict;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, Completion, FnBackend, ScriptedBackend, Usage};
pub use cache::{CacheEntry, ResponseCache};
pub use detect::{Client, DetectionRecord, Outcome, Reply, SCHEMA_REMINDER};
pub use http::HttpBackend;
pub use request::{fingerprint, ChatMessage, ChatRequest, ContentPart, Role};
pub use verdict::{parse_verdict, render_verdict, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for Mode {
    type Err = ClientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(ClientError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint_url: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub max_in_flight: usize,
    pub mode: Mode,
    /// Environment variable holding the bearer token; unset variable means no auth header.
    pub api_key_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_id: "gpt-4.1-2025-04-14".into(),
            temperature: 0.0,
            max_output_tokens: 1024,
            max_in_flight: 4,
            mode: Mode::Live,
            api_key_env: Some("OPENAI_API_KEY".into()),
            cache_dir: None,
            max_retries: 3,
            retry_backoff_ms: 500,
            timeout_secs: 120,
        }
    }
}

impl ModelConfig {
    /// Defaults for the refinement pre-processor, which uses its own model.
    pub fn preprocessor() -> Self {
        Self {
            model_id: "gpt-4o".into(),
            ..Self::default()
        }
    }

    pub fn replay(model_id: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_id: model_id.into(),
            mode: Mode::Replay,
            cache_dir: Some(cache_dir.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ClientError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_in_flight == 0 {
            return Err(ClientError::Config("max_in_flight must be >= 1".into()));
        }
        if self.model_id.is_empty() {
            return Err(ClientError::Config("model_id is empty".into()));
        }
        if self.mode != Mode::Live && self.cache_dir.is_none() {
            return Err(ClientError::Config(format!("{:?} mode needs a cache_dir", self.mode)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("replay cache has no entry for fingerprint {fingerprint}")]
    CacheMiss { fingerprint: String },
    #[error("malformed model output: {0}")]
    MalformedOutput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ClientError {
    pub fn is_cache_miss(&self) -> bool {
        matches!(self, ClientError::CacheMiss { .. })
    }
}
