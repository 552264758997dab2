use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Replay lookup key, `template_id:hash`. Ignored by live providers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_key: Option<String>,
}

impl ChatRequest {
    pub fn new(user: impl Into<String>) -> Self {
        Self {
            system: String::new(),
            user: user.into(),
            temperature: 0.0,
            max_tokens: 1024,
            replay_key: None,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.user.trim().is_empty() {
            return Err(LlmError::InvalidRequest("user prompt is empty".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} is not a non-negative number",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport { status: Option<u16>, message: String },
    #[error("no scripted response for key `{key}`")]
    ScriptedMiss { key: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay fixture: {0}")]
    Fixture(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

/// A chat-completion backend. Implementations are shared across threads.
pub trait ChatProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).chat(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).chat(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).chat(request)
    }
}

/// OpenAI chat-completions compatible HTTP provider.
pub struct OpenAiChatProvider {
    url: String,
    key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

impl OpenAiChatProvider {
    pub fn new(base_url: &str, key: Option<String>, model: impl Into<String>) -> Result<Self, LlmError> {
        let trimmed = base_url.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            url,
            key,
            model: model.into(),
            client,
        })
    }

    /// Reads `MEM_LLM_URL`, `MEM_LLM_KEY` and `MEM_LLM_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let url = std::env::var("MEM_LLM_URL")
            .map_err(|_| LlmError::Config("MEM_LLM_URL is not set".into()))?;
        let key = std::env::var("MEM_LLM_KEY").ok().filter(|k| !k.is_empty());
        let model = std::env::var("MEM_LLM_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into());
        Self::new(&url, key, model)
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl ChatProvider for OpenAiChatProvider {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let mut messages = Vec::with_capacity(2);
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut call = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| LlmError::Transport {
            status: e.status().map(|s| s.as_u16()),
            message: e.to_string(),
        })?;
        let status = response.status();
        if !status.is_success() {
            let message = response.text().unwrap_or_default();
            return Err(LlmError::Transport {
                status: Some(status.as_u16()),
                message,
            });
        }
        let value: serde_json::Value = response.json().map_err(|e| LlmError::Transport {
            status: Some(status.as_u16()),
            message: format!("undecodable body: {e}"),
        })?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| LlmError::Transport {
                status: Some(status.as_u16()),
                message: "response has no choices[0].message.content".into(),
            })?
            .to_string();
        let count = |p: &str| value.pointer(p).and_then(|v| v.as_u64()).unwrap_or(0);
        Ok(ChatResponse {
            text,
            usage: TokenUsage {
                prompt: count("/usage/prompt_tokens"),
                completion: count("/usage/completion_tokens"),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub response_text: String,
}

/// Replays recorded responses by key. A miss is an error, never a guess.
#[derive(Debug, Default)]
pub struct ReplayProvider {
    responses: HashMap<String, String>,
    log: Mutex<Vec<String>>,
}

impl ReplayProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut provider = Self::new();
        for r in records {
            provider.insert(r.key, r.response_text);
        }
        provider
    }

    /// Parses a JSONL fixture; blank lines are ignored. Later records with a
    /// repeated key win.
    pub fn from_jsonl(text: &str) -> Result<Self, LlmError> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(line)
                .map_err(|e| LlmError::Fixture(format!("line {}: {e}", n + 1)))?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    pub fn from_path(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Loads the fixture named by `MEM_LLM_REPLAY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let path = std::env::var("MEM_LLM_REPLAY")
            .map_err(|_| LlmError::Config("MEM_LLM_REPLAY is not set".into()))?;
        Self::from_path(Path::new(&path))
    }

    pub fn insert(&mut self, key: impl Into<String>, response_text: impl Into<String>) {
        self.responses.insert(key.into(), response_text.into());
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Keys requested so far, in call order, hits and misses alike.
    pub fn requested_keys(&self) -> Vec<String> {
        self.log.lock().expect("replay log poisoned").clone()
    }
}

impl ChatProvider for ReplayProvider {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = request.replay_key.clone().unwrap_or_default();
        self.log.lock().expect("replay log poisoned").push(key.clone());
        match self.responses.get(&key) {
            Some(text) => Ok(ChatResponse {
                text: text.clone(),
                usage: TokenUsage::default(),
            }),
            None => Err(LlmError::ScriptedMiss { key }),
        }
    }
}
