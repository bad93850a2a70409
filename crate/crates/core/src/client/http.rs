use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use serde_json::Value;
use tracing::warn;

use super::{Backend, ChatRequest, ClientError, Completion, ModelConfig, Usage};

/// OpenAI-compatible chat-completions endpoint over HTTP.
///
/// The underlying blocking client is built on first use, so constructing a
/// backend inside an async context is fine as long as requests run on a
/// blocking thread.
pub struct HttpBackend {
    endpoint_url: String,
    api_key: Option<String>,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
    http: OnceLock<Result<reqwest::blocking::Client, String>>,
}

impl HttpBackend {
    pub fn new(config: &ModelConfig) -> Self {
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        Self {
            endpoint_url: config.endpoint_url.clone(),
            api_key,
            timeout: Duration::from_secs(config.timeout_secs.max(1)),
            max_retries: config.max_retries,
            backoff: Duration::from_millis(config.retry_backoff_ms),
            http: OnceLock::new(),
        }
    }

    fn http(&self) -> Result<&reqwest::blocking::Client, ClientError> {
        self.http
            .get_or_init(|| {
                reqwest::blocking::Client::builder()
                    .timeout(self.timeout)
                    .build()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| ClientError::Transport(e.clone()))
    }

    fn attempt(&self, body: &Value) -> Result<Completion, Attempt> {
        let http = self.http().map_err(Attempt::Fatal)?;
        let mut req = http.post(&self.endpoint_url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            let err = ClientError::Transport(e.to_string());
            if e.is_connect() || e.is_timeout() || e.is_request() {
                Attempt::Transient(err)
            } else {
                Attempt::Fatal(err)
            }
        })?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| Attempt::Transient(ClientError::Transport(e.to_string())))?;
        if !status.is_success() {
            let err = ClientError::Provider {
                status: status.as_u16(),
                message: provider_message(&text),
            };
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                Attempt::Transient(err)
            } else {
                Attempt::Fatal(err)
            });
        }
        parse_completion(&text).map_err(Attempt::Fatal)
    }
}

enum Attempt {
    Transient(ClientError),
    Fatal(ClientError),
}

impl Backend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ClientError> {
        let body = request.to_wire();
        let mut tries = 0;
        loop {
            match self.attempt(&body) {
                Ok(c) => return Ok(c),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(e)) if tries >= self.max_retries => return Err(e),
                Err(Attempt::Transient(e)) => {
                    let wait = self.backoff * 2u32.saturating_pow(tries);
                    warn!(error = %e, attempt = tries + 1, ?wait, "transient failure, retrying");
                    thread::sleep(wait);
                    tries += 1;
                }
            }
        }
    }
}

fn provider_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| v["error"]["message"].as_str().map(str::to_string))
        .unwrap_or_else(|| body.chars().take(500).collect())
}

fn parse_completion(body: &str) -> Result<Completion, ClientError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| ClientError::Transport(format!("response is not JSON: {e}")))?;
    let content = &v["choices"][0]["message"]["content"];
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        _ => return Err(ClientError::Transport("response has no message content".into())),
    };
    let u = &v["usage"];
    let count = |a: &str, b: &str| u[a].as_u64().or_else(|| u[b].as_u64()).unwrap_or(0);
    Ok(Completion::new(
        text,
        Usage {
            input_tokens: count("prompt_tokens", "input_tokens"),
            output_tokens: count("completion_tokens", "output_tokens"),
        },
    ))
}
