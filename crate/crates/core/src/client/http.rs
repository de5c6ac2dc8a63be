use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::{ChatRequest, ClientError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub usage: Option<TokenUsage>,
}

/// Anything that can answer a chat request. The HTTP client is the real
/// implementation; tests substitute in-process fakes.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ClientError>;
}

fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// e.g. `http://localhost:8000/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            max_concurrent: default_concurrency(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<TokenUsage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<serde_json::Value>,
}

/// Blocking client for `POST {base_url}/chat/completions`.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    token: Option<String>,
    max_retries: u32,
    backoff: Duration,
}

impl HttpBackend {
    pub fn new(cfg: &EndpointConfig) -> Result<Self, ClientError> {
        let token = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| ClientError::MissingToken(var.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ClientError::TransportError(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            token,
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
        })
    }

    fn attempt(&self, request: &ChatRequest) -> Result<(String, Option<TokenUsage>), ClientError> {
        let mut call = self.client.post(&self.url).json(request);
        if let Some(token) = &self.token {
            call = call.bearer_auth(token);
        }
        let resp = call.send().map_err(classify)?;
        let status = resp.status();
        let body = resp.text().map_err(classify)?;
        if !status.is_success() {
            return Err(ClientError::HttpError {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let parsed: ResponseBody = serde_json::from_str(&body).map_err(|e| ClientError::InvalidResponse(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ClientError::InvalidResponse("no choices".into()))?;
        Ok((content_text(choice.message.content), parsed.usage))
    }
}

/// Content may be a plain string or a list of text parts.
fn content_text(content: Option<serde_json::Value>) -> String {
    match content {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Array(parts)) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(|t| t.as_str()))
            .collect::<Vec<_>>()
            .join(""),
        _ => String::new(),
    }
}

fn classify(e: reqwest::Error) -> ClientError {
    if e.is_timeout() {
        ClientError::Timeout
    } else {
        ClientError::TransportError(e.to_string())
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, ClientError> {
        let start = Instant::now();
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok((text, usage)) => {
                    return Ok(Completion {
                        text,
                        latency_ms: start.elapsed().as_millis() as u64,
                        usage,
                    })
                }
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let delay = self.backoff * 2u32.saturating_pow(attempt);
                    warn!(error = %e, attempt, ?delay, "request failed; retrying");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) if e.is_retryable() => {
                    return Err(ClientError::RetriesExhausted {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => {
                    debug!(error = %e, "request failed permanently");
                    return Err(e);
                }
            }
        }
    }
}
