use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ClientError};

/// Token counts as reported by the provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl std::ops::Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

impl Completion {
    pub fn new(text: impl Into<String>, usage: Usage) -> Self {
        Self { text: text.into(), usage }
    }
}

/// Something that answers a chat request: the HTTP endpoint, or a stub.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ClientError>;
}

/// Backend driven by a closure.
pub struct FnBackend<F>(pub F);

impl<F> Backend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<Completion, ClientError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ClientError> {
        (self.0)(request)
    }
}

/// Returns canned responses in order and counts calls.
#[derive(Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _request: &ChatRequest) -> Result<Completion, ClientError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = self
            .responses
            .lock()
            .expect("poisoned")
            .pop_front()
            .ok_or_else(|| ClientError::Transport("scripted backend exhausted".into()))?;
        let output_tokens = text.split_whitespace().count() as u64;
        Ok(Completion::new(
            text,
            Usage {
                input_tokens: 100,
                output_tokens,
            },
        ))
    }
}
