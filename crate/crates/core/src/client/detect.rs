use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::cache::{CacheEntry, ResponseCache};
use super::limiter::Limiter;
use super::{
    fingerprint, parse_verdict, Backend, ChatRequest, ClientError, HttpBackend, Mode, ModelConfig,
    Usage, Verdict,
};
use crate::prompt::ComposedPrompt;
use crate::Label;

/// Appended as an extra user message when the first answer cannot be parsed.
pub const SCHEMA_REMINDER: &str = "Your previous answer could not be parsed. \
Respond only with a JSON object like this:\n\n```\n{\"Classification\": <0 or 1>, \"Reasoning\": <explanation>}\n```";

/// Raw model answer plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub raw_text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Verdict(Verdict),
    /// Still unparseable after the corrective retry. Never counted as 0 or 1.
    ParseFailure { raw_text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub sample_id: String,
    pub outcome: Outcome,
    pub usage: Usage,
    pub latency_ms: u64,
    pub cache_hit: bool,
    pub retried: bool,
}

impl DetectionRecord {
    pub fn classification(&self) -> Option<Label> {
        match &self.outcome {
            Outcome::Verdict(v) => Some(v.classification),
            Outcome::ParseFailure { .. } => None,
        }
    }

    pub fn reasoning(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Verdict(v) => Some(&v.reasoning),
            Outcome::ParseFailure { .. } => None,
        }
    }
}

/// Shareable model client with an admission limit of `max_in_flight`.
pub struct Client {
    config: ModelConfig,
    backend: Option<Arc<dyn Backend>>,
    cache: Option<ResponseCache>,
    limiter: Limiter,
}

impl Client {
    /// Live and Record modes talk HTTP; Replay never builds a backend.
    pub fn new(config: ModelConfig) -> Result<Self, ClientError> {
        let backend: Option<Arc<dyn Backend>> = match config.mode {
            Mode::Replay => None,
            Mode::Live | Mode::Record => Some(Arc::new(HttpBackend::new(&config))),
        };
        Self::build(config, backend)
    }

    /// Uses `backend` instead of HTTP. In Replay mode the backend is dropped.
    pub fn with_backend(config: ModelConfig, backend: Arc<dyn Backend>) -> Result<Self, ClientError> {
        let backend = (config.mode != Mode::Replay).then_some(backend);
        Self::build(config, backend)
    }

    fn build(config: ModelConfig, backend: Option<Arc<dyn Backend>>) -> Result<Self, ClientError> {
        config.validate()?;
        let cache = config.cache_dir.as_ref().map(ResponseCache::new);
        let limiter = Limiter::new(config.max_in_flight);
        Ok(Self {
            config,
            backend,
            cache,
            limiter,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn max_in_flight(&self) -> usize {
        self.config.max_in_flight
    }

    pub fn send(&self, request: &ChatRequest) -> Result<Reply, ClientError> {
        let key = fingerprint(request);
        match self.config.mode {
            Mode::Replay => {
                let entry = self
                    .cache()?
                    .load(&key)?
                    .ok_or(ClientError::CacheMiss { fingerprint: key })?;
                Ok(hit(entry))
            }
            Mode::Record => {
                let cache = self.cache()?;
                if let Some(entry) = cache.load(&key)? {
                    return Ok(hit(entry));
                }
                let reply = self.live(request)?;
                cache.store(&CacheEntry {
                    fingerprint: key,
                    raw_text: reply.raw_text.clone(),
                    usage: reply.usage,
                    latency_ms: reply.latency_ms,
                })?;
                Ok(reply)
            }
            Mode::Live => self.live(request),
        }
    }

    fn cache(&self) -> Result<&ResponseCache, ClientError> {
        self.cache
            .as_ref()
            .ok_or_else(|| ClientError::Config("mode needs a cache_dir".into()))
    }

    fn live(&self, request: &ChatRequest) -> Result<Reply, ClientError> {
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| ClientError::Config("no backend configured".into()))?;
        let _permit = self.limiter.acquire();
        let start = Instant::now();
        let completion = backend.complete(request)?;
        Ok(Reply {
            raw_text: completion.text,
            usage: completion.usage,
            latency_ms: start.elapsed().as_millis() as u64,
            cache_hit: false,
        })
    }

    /// Sends the composed prompt and parses the verdict, with exactly one
    /// corrective retry on malformed output.
    pub fn classify(&self, prompt: &ComposedPrompt, sample_id: &str) -> Result<DetectionRecord, ClientError> {
        let request = ChatRequest::from_prompt(&self.config, prompt)?;
        let first = self.send(&request)?;
        let mut record = DetectionRecord {
            sample_id: sample_id.to_string(),
            outcome: Outcome::ParseFailure {
                raw_text: first.raw_text.clone(),
            },
            usage: first.usage,
            latency_ms: first.latency_ms,
            cache_hit: first.cache_hit,
            retried: false,
        };
        match parse_verdict(&first.raw_text) {
            Ok(v) => {
                record.outcome = Outcome::Verdict(v);
                return Ok(record);
            }
            Err(e) => debug!(sample_id, error = %e, "malformed output, retrying once"),
        }

        let mut retry = request;
        retry.push_user_text(SCHEMA_REMINDER);
        let second = self.send(&retry)?;
        record.retried = true;
        record.usage = record.usage + second.usage;
        record.latency_ms += second.latency_ms;
        record.cache_hit &= second.cache_hit;
        record.outcome = match parse_verdict(&second.raw_text) {
            Ok(v) => Outcome::Verdict(v),
            Err(_) => Outcome::ParseFailure {
                raw_text: second.raw_text,
            },
        };
        Ok(record)
    }
}

fn hit(entry: CacheEntry) -> Reply {
    Reply {
        raw_text: entry.raw_text,
        usage: entry.usage,
        latency_ms: entry.latency_ms,
        cache_hit: true,
    }
}
