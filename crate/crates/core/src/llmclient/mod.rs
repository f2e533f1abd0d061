//! Chat-completion clients: an OpenAI-compatible HTTP client and a scripted
//! playback client for tests.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

/// Environment variable holding the API key sent as a bearer token.
pub const API_KEY_ENV: &str = "SPATIAL_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub media: Vec<String>,
}

impl ChatTurn {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: Role::System, text: text.into(), media: Vec::new() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into(), media: Vec::new() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into(), media: Vec::new() }
    }

    pub fn with_media(mut self, media: Vec<String>) -> Self {
        self.media = media;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChatError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid chat configuration: {0}")]
    Config(String),
    #[error("scripted client exhausted after {0} responses")]
    ScriptExhausted(usize),
}

/// Anything that can complete a chat. Implementations must tolerate
/// concurrent callers.
pub trait ChatClient: Send + Sync {
    fn chat(&self, turns: &[ChatTurn]) -> Result<String, ChatError>;
}

/// Output-token tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenTier {
    Standard,
    Reasoning,
    Agent,
}

impl TokenTier {
    pub fn max_tokens(self) -> u32 {
        match self {
            TokenTier::Standard => 512,
            TokenTier::Reasoning => 2048,
            TokenTier::Agent => 4096,
        }
    }
}

/// How image references are attached to requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaEncoding {
    /// Inline `data:` URIs with base64 content.
    #[default]
    DataUri,
    /// `file://` URLs for servers sharing the filesystem.
    FileRef,
    /// Drop media (blind runs).
    Omit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Sent as the request `seed` when set.
    pub seed: Option<u64>,
    pub timeout_secs: u64,
    /// Total attempts per request (1 = no retries).
    pub retry_budget: u32,
    pub retry_backoff_ms: u64,
    pub media_encoding: MediaEncoding,
    /// Maximum media items attached per request (extra items are dropped).
    pub max_media: Option<usize>,
    /// Requests per second for the client-level token bucket.
    pub rate_limit_per_sec: Option<f64>,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1".into(),
            model: "default".into(),
            temperature: 0.0,
            max_tokens: TokenTier::Standard.max_tokens(),
            seed: Some(0),
            timeout_secs: 120,
            retry_budget: 3,
            retry_backoff_ms: 500,
            media_encoding: MediaEncoding::DataUri,
            max_media: None,
            rate_limit_per_sec: None,
        }
    }
}

impl ChatConfig {
    pub fn validate(&self) -> Result<(), ChatError> {
        if !(self.temperature >= 0.0) {
            return Err(ChatError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(ChatError::Config("max_tokens must be positive".into()));
        }
        if self.retry_budget == 0 {
            return Err(ChatError::Config("retry_budget must be at least 1".into()));
        }
        if self.endpoint.is_empty() {
            return Err(ChatError::Config("endpoint is empty".into()));
        }
        Ok(())
    }
}

struct TokenBucket {
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        Self { rate, state: Mutex::new((rate.max(1.0), Instant::now())) }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                let refill = now.duration_since(s.1).as_secs_f64() * self.rate;
                s.0 = (s.0 + refill).min(self.rate.max(1.0));
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Client for OpenAI-compatible `/chat/completions` endpoints.
pub struct OpenAiClient {
    cfg: ChatConfig,
    http: reqwest::blocking::Client,
    api_key: Option<String>,
    retries: AtomicU64,
    bucket: Option<TokenBucket>,
}

enum Attempt {
    Retry(String),
    Fatal(ChatError),
}

impl OpenAiClient {
    pub fn new(cfg: ChatConfig) -> Result<Self, ChatError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ChatError::Config(e.to_string()))?;
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        let bucket = cfg.rate_limit_per_sec.filter(|r| *r > 0.0).map(TokenBucket::new);
        Ok(Self { cfg, http, api_key, retries: AtomicU64::new(0), bucket })
    }

    pub fn config(&self) -> &ChatConfig {
        &self.cfg
    }

    /// Retries performed so far across all requests.
    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn encode_media(&self, reference: &str) -> Result<String, ChatError> {
        match self.cfg.media_encoding {
            MediaEncoding::FileRef => {
                let abs = std::fs::canonicalize(reference).unwrap_or_else(|_| Path::new(reference).to_path_buf());
                Ok(format!("file://{}", abs.display()))
            }
            _ => {
                if reference.starts_with("data:") || reference.starts_with("http") {
                    return Ok(reference.to_string());
                }
                let bytes = std::fs::read(reference)
                    .map_err(|e| ChatError::Transport(format!("cannot read media {reference}: {e}")))?;
                let mime = match Path::new(reference).extension().and_then(|e| e.to_str()) {
                    Some("jpg") | Some("jpeg") => "image/jpeg",
                    Some("mp4") => "video/mp4",
                    _ => "image/png",
                };
                Ok(format!("data:{mime};base64,{}", base64::engine::general_purpose::STANDARD.encode(bytes)))
            }
        }
    }

    /// Request body for the given turns.
    pub fn request_body(&self, turns: &[ChatTurn]) -> Result<Value, ChatError> {
        let mut budget = self.cfg.max_media.unwrap_or(usize::MAX);
        let mut messages = Vec::with_capacity(turns.len());
        for t in turns {
            let media: Vec<&String> = if self.cfg.media_encoding == MediaEncoding::Omit {
                Vec::new()
            } else {
                let take = t.media.len().min(budget);
                budget -= take;
                t.media.iter().take(take).collect()
            };
            let content = if media.is_empty() {
                Value::String(t.text.clone())
            } else {
                let mut parts = vec![json!({"type": "text", "text": t.text})];
                for m in media {
                    parts.push(json!({"type": "image_url", "image_url": {"url": self.encode_media(m)?}}));
                }
                Value::Array(parts)
            };
            messages.push(json!({"role": t.role, "content": content}));
        }
        let mut body = json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        if let Some(seed) = self.cfg.seed {
            body["seed"] = json!(seed);
        }
        Ok(body)
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        if let Some(b) = &self.bucket {
            b.acquire();
        }
        let url = format!("{}/chat/completions", self.cfg.endpoint.trim_end_matches('/'));
        let mut req = self.http.post(&url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Fatal(ChatError::Protocol(format!("HTTP {status}: {text}"))));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(ChatError::Protocol(format!("invalid JSON response: {e}"))))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(ChatError::Protocol("response has no choices[0].message.content".into())))
    }
}

impl ChatClient for OpenAiClient {
    fn chat(&self, turns: &[ChatTurn]) -> Result<String, ChatError> {
        let body = self.request_body(turns)?;
        let mut last = String::new();
        for attempt in 0..self.cfg.retry_budget {
            if attempt > 0 {
                self.retries.fetch_add(1, Ordering::Relaxed);
                let backoff = self.cfg.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(6));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!("chat attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(ChatError::Transport(format!("retry budget of {} exhausted: {last}", self.cfg.retry_budget)))
    }
}

/// Plays back a fixed list of responses and records every prompt.
#[derive(Default)]
pub struct ScriptedClient {
    script: Mutex<VecDeque<Result<String, ChatError>>>,
    served: AtomicU64,
    log: Mutex<Vec<Vec<ChatTurn>>>,
}

impl ScriptedClient {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_results(responses.into_iter().map(|s| Ok(s.into())))
    }

    /// Script entries may be errors, to simulate transport failures.
    pub fn with_results(results: impl IntoIterator<Item = Result<String, ChatError>>) -> Self {
        Self { script: Mutex::new(results.into_iter().collect()), ..Default::default() }
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<Vec<ChatTurn>> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("script lock").len()
    }
}

impl ChatClient for ScriptedClient {
    fn chat(&self, turns: &[ChatTurn]) -> Result<String, ChatError> {
        self.log.lock().expect("log lock").push(turns.to_vec());
        let next = self.script.lock().expect("script lock").pop_front();
        match next {
            Some(r) => {
                self.served.fetch_add(1, Ordering::Relaxed);
                r
            }
            None => Err(ChatError::ScriptExhausted(self.served.load(Ordering::Relaxed) as usize)),
        }
    }
}

/// Echoes the text of the last user turn.
pub struct EchoClient;

impl ChatClient for EchoClient {
    fn chat(&self, turns: &[ChatTurn]) -> Result<String, ChatError> {
        turns
            .iter()
            .rev()
            .find(|t| t.role == Role::User)
            .map(|t| t.text.clone())
            .ok_or_else(|| ChatError::Protocol("no user turn".into()))
    }
}
