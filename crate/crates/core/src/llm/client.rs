//! Minimal OpenAI-style chat-completions client with bounded retries.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::PromptBundle;

/// Completion-budget heuristic: tokens allowed per expected output row,
/// per task. Rows are short (five tab-separated fields), so this is
/// generous without inviting rambling.
const TOKENS_PER_ROW: u32 = 16;
const RESPONSE_OVERHEAD: u32 = 64;
const MAX_COMPLETION_TOKENS: u32 = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// Wire-format request body for `POST .../chat/completions`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl ChatRequest {
    /// Builds the two-message request for one prompt. When `max_tokens` is
    /// not given it is sized from the sentence length and task count.
    pub fn from_bundle(bundle: &PromptBundle, model: impl Into<String>, max_tokens: Option<u32>) -> ChatRequest {
        let budget = max_tokens.unwrap_or_else(|| {
            let rows = bundle.n_words as u32 * bundle.plan.steps() as u32;
            (rows * TOKENS_PER_ROW + RESPONSE_OVERHEAD).min(MAX_COMPLETION_TOKENS)
        });
        ChatRequest {
            model: model.into(),
            messages: vec![
                ChatMessage { role: Role::System, content: bundle.system.clone() },
                ChatMessage { role: Role::User, content: bundle.user.clone() },
            ],
            max_tokens: budget,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.model.is_empty() {
            return Err(LlmError::InvalidRequest("model name is empty".into()));
        }
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if self.messages[0].role != Role::System {
            return Err(LlmError::InvalidRequest("first message must be the system role".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Bounded exponential backoff. Delays double per retry with no jitter,
/// keeping runs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Pause before the given 1-based attempt: none before the first, then
    /// `base * 2^(attempt-2)` capped at `max_delay`.
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        let factor = 2u32.saturating_pow(attempt.saturating_sub(2).min(16));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("endpoint returned {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid mock policy: {0}")]
    InvalidPolicy(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<LlmError> },
}

impl LlmError {
    /// Worth retrying: transport failures, rate limiting, server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Endpoint { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, LlmError::RetriesExhausted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// 1-based number of the attempt that succeeded.
    pub attempts: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

pub struct ChatClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

// Hand-written so the API key can never end up in logs or panics.
impl fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatClient")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl ChatClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, retry: RetryPolicy) -> ChatClient {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        ChatClient {
            agent: ureq::Agent::new_with_config(config),
            endpoint: endpoint.into(),
            api_key,
            retry,
        }
    }

    /// Full URL of the completions resource: endpoints already naming
    /// `/chat/completions` pass through, a trailing `/v1` gets
    /// `/chat/completions`, anything else gets `/v1/chat/completions`.
    pub fn completions_url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }

    /// Sends the request, retrying transient failures with backoff until
    /// the attempt budget runs out.
    pub fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        request.validate()?;
        let url = self.completions_url();
        let mut last: Option<LlmError> = None;
        for attempt in 1..=self.retry.max_attempts.max(1) {
            thread::sleep(self.retry.delay_before(attempt));
            match self.send_once(&url, request) {
                Ok(text) => return Ok(Completion { text, attempts: attempt }),
                Err(err) if err.is_transient() => {
                    log::warn!("attempt {attempt} against {url} failed: {err}");
                    last = Some(err);
                }
                Err(err) => return Err(err),
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: self.retry.max_attempts.max(1),
            last: Box::new(last.expect("loop ran at least once")),
        })
    }

    fn send_once(&self, url: &str, request: &ChatRequest) -> Result<String, LlmError> {
        let mut builder = self.agent.post(url).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            builder = builder.header("authorization", format!("Bearer {key}"));
        }
        let mut response =
            builder.send_json(request).map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let mut body = response.body_mut().read_to_string().unwrap_or_default();
            body.truncate(200);
            return Err(LlmError::Endpoint { status, body });
        }
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        match parsed.choices.into_iter().next() {
            Some(choice) => Ok(choice.message.content),
            None => Err(LlmError::MalformedResponse("response carried no choices".into())),
        }
    }
}
