use std::fs;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{ClientError, ModelConfig};
use crate::prompt::{ComposedPrompt, Part};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ContentPart {
    Text { text: String },
    Image { media_type: String, data: String },
}

impl ContentPart {
    pub fn text(t: impl Into<String>) -> Self {
        ContentPart::Text { text: t.into() }
    }

    pub fn image_bytes(media_type: impl Into<String>, bytes: &[u8]) -> Self {
        ContentPart::Image {
            media_type: media_type.into(),
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            parts: vec![ContentPart::text(text)],
        }
    }

    pub fn user(parts: Vec<ContentPart>) -> Self {
        Self { role: Role::User, parts }
    }

    /// Concatenated text parts, newline separated.
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text { text } => Some(text.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn new(config: &ModelConfig, messages: Vec<ChatMessage>) -> Result<Self, ClientError> {
        let systems: Vec<usize> = messages
            .iter()
            .enumerate()
            .filter(|(_, m)| m.role == Role::System)
            .map(|(i, _)| i)
            .collect();
        if systems.len() > 1 || systems.first().is_some_and(|i| *i != 0) {
            return Err(ClientError::InvalidRequest(
                "at most one system message, and only in first position".into(),
            ));
        }
        if messages.is_empty() {
            return Err(ClientError::InvalidRequest("no messages".into()));
        }
        Ok(Self {
            model_id: config.model_id.clone(),
            temperature: config.temperature,
            max_output_tokens: config.max_output_tokens,
            messages,
        })
    }

    /// System text becomes the system message; user parts become one user
    /// message, with image files read and base64 encoded.
    pub fn from_prompt(config: &ModelConfig, prompt: &ComposedPrompt) -> Result<Self, ClientError> {
        let mut parts = Vec::with_capacity(prompt.user_parts.len());
        for part in &prompt.user_parts {
            parts.push(match part {
                Part::Text(t) => ContentPart::text(t.clone()),
                Part::Image(img) => {
                    let bytes = fs::read(&img.path).map_err(|source| ClientError::Io {
                        path: img.path.clone(),
                        source,
                    })?;
                    ContentPart::image_bytes(img.media_type.clone(), &bytes)
                }
            });
        }
        let mut messages = Vec::with_capacity(2);
        if !prompt.system_text.is_empty() {
            messages.push(ChatMessage::system(prompt.system_text.clone()));
        }
        messages.push(ChatMessage::user(parts));
        Self::new(config, messages)
    }

    pub fn push_user_text(&mut self, text: impl Into<String>) {
        self.messages.push(ChatMessage::user(vec![ContentPart::text(text)]));
    }

    /// OpenAI-compatible chat-completions body.
    pub fn to_wire(&self) -> Value {
        let messages: Vec<Value> = self
            .messages
            .iter()
            .map(|m| {
                let content: Vec<Value> = m
                    .parts
                    .iter()
                    .map(|p| match p {
                        ContentPart::Text { text } => json!({"type": "text", "text": text}),
                        ContentPart::Image { media_type, data } => json!({
                            "type": "image_url",
                            "image_url": {"url": format!("data:{media_type};base64,{data}")}
                        }),
                    })
                    .collect();
                json!({"role": m.role, "content": content})
            })
            .collect();
        json!({
            "model": self.model_id,
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
            "messages": messages,
        })
    }
}

#[derive(Serialize)]
struct FingerprintPayload<'a> {
    model_id: &'a str,
    temperature: String,
    messages: &'a [ChatMessage],
}

/// Hex SHA-256 over the model id, the temperature and the full message
/// payload (including image bytes).
pub fn fingerprint(request: &ChatRequest) -> String {
    let payload = FingerprintPayload {
        model_id: &request.model_id,
        temperature: format!("{:?}", request.temperature),
        messages: &request.messages,
    };
    let bytes = serde_json::to_vec(&payload).expect("request serializes");
    hex::encode(Sha256::digest(&bytes))
}
