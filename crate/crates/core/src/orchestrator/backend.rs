//! Language-model backends: OpenAI-compatible HTTP, recorded replay and
//! scripted responses for tests.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub system_text: String,
    pub user_text: String,
    pub max_output_tokens: u32,
    pub temperature: f32,
    pub model: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// `text` is exactly what the model returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    #[serde(default)]
    pub finish_reason: Option<String>,
    #[serde(default)]
    pub usage: Option<Usage>,
}

impl LlmResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            finish_reason: None,
            usage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Network failures, timeouts, 429 and 5xx responses. Worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request rejected: {0}")]
    Rejected(String),
    #[error("no recorded response left (call {0})")]
    Exhausted(usize),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

pub trait LlmBackend {
    fn complete(&mut self, request: &LlmRequest) -> Result<LlmResponse, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&mut self, request: &LlmRequest) -> Result<LlmResponse, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key: None,
            timeout: Duration::from_secs(600),
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // the key is deliberately left out
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.config.endpoint)
            .finish()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&mut self, request: &LlmRequest) -> Result<LlmResponse, BackendError> {
        let body = serde_json::json!({
            "model": request.model,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        });
        let mut call = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| BackendError::Transport(e.without_url().to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(BackendError::Rejected(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::Transport(format!("malformed response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Transport("response has no choices".into()))?;
        Ok(LlmResponse {
            text: choice.message.content.unwrap_or_default(),
            finish_reason: choice.finish_reason,
            usage: parsed.usage,
        })
    }
}

/// Serves recorded responses in order, one per call.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    responses: VecDeque<LlmResponse>,
    served: usize,
}

impl ReplayBackend {
    pub fn new(responses: Vec<LlmResponse>) -> Self {
        Self {
            responses: responses.into(),
            served: 0,
        }
    }

    /// One JSON value per non-blank line: either a response object or a
    /// bare string.
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let mut responses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| BackendError::Config(format!("replay line {}: {e}", i + 1)))?;
            let response = match value {
                serde_json::Value::String(s) => LlmResponse::text(s),
                other => serde_json::from_value(other)
                    .map_err(|e| BackendError::Config(format!("replay line {}: {e}", i + 1)))?,
            };
            responses.push(response);
        }
        Ok(Self::new(responses))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&mut self, _request: &LlmRequest) -> Result<LlmResponse, BackendError> {
        self.served += 1;
        self.responses
            .pop_front()
            .ok_or(BackendError::Exhausted(self.served))
    }
}

/// Canned outcomes for tests. When the script runs out the last entry
/// repeats, unless the backend is strict, in which case further calls fail.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    script: Vec<Result<String, BackendError>>,
    strict: bool,
    requests: Vec<LlmRequest>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        Self::with_outcomes(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn with_outcomes(outcomes: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        Self {
            script: outcomes.into_iter().collect(),
            strict: false,
            requests: Vec::new(),
        }
    }

    pub fn repeating(text: impl Into<String>) -> Self {
        Self::new([text.into()])
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    pub fn calls(&self) -> usize {
        self.requests.len()
    }

    pub fn requests(&self) -> &[LlmRequest] {
        &self.requests
    }

    /// Responses separated by lines consisting of `%%%`.
    pub fn parse(text: &str) -> Self {
        let mut texts = vec![String::new()];
        for line in text.lines() {
            if line.trim_end() == "%%%" {
                texts.push(String::new());
            } else {
                let current = texts.last_mut().expect("never empty");
                current.push_str(line);
                current.push('\n');
            }
        }
        Self::new(texts)
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&mut self, request: &LlmRequest) -> Result<LlmResponse, BackendError> {
        self.requests.push(request.clone());
        let index = self.requests.len() - 1;
        let entry = match self.script.get(index) {
            Some(entry) => entry,
            None if self.strict || self.script.is_empty() => {
                return Err(BackendError::Exhausted(index + 1))
            }
            None => self.script.last().expect("nonempty"),
        };
        entry.clone().map(LlmResponse::text)
    }
}
