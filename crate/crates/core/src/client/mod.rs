//! Chat requests against an OpenAI-compatible endpoint, prompt templates
//! and answer extraction.

mod extract;
mod http;
mod prompt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::extract_answer;
pub use http::{ChatBackend, Completion, EndpointConfig, HttpBackend, TokenUsage};
pub use prompt::{build_prompt, build_request, ChatMessage, ChatRequest, ContentPart, ImageUrl, COT_TEMPLATE, DIRECT_TEMPLATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    Direct,
    #[serde(alias = "CoT")]
    Cot,
}

/// Decoding settings sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u32>,
    /// Greedy decoding; forces temperature 0 on the wire.
    pub deterministic: bool,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            max_new_tokens: 2048,
            temperature: None,
            top_p: None,
            top_k: None,
            seed: None,
            deterministic: true,
        }
    }
}

impl GenerationParams {
    /// Sampling preset for thinking-mode models.
    pub fn thinking(seed: u32) -> Self {
        Self {
            max_new_tokens: 8192,
            temperature: Some(0.6),
            top_p: Some(0.95),
            top_k: Some(20),
            seed: Some(seed),
            deterministic: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("gave up after {attempts} attempts; last error: {last}")]
    RetriesExhausted { attempts: u32, last: Box<ClientError> },
    #[error("malformed response: {0}")]
    InvalidResponse(String),
    #[error("cannot encode image: {0}")]
    ImageEncoding(String),
    #[error("environment variable {0} holding the API token is not set")]
    MissingToken(String),
}

impl ClientError {
    /// Transport failures, timeouts, 429 and 5xx are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            ClientError::TransportError(_) | ClientError::Timeout => true,
            ClientError::HttpError { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
