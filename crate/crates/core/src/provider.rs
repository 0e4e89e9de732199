//! Chat-completion provider: a live OpenAI-compatible HTTP backend plus a
//! deterministic record/replay cassette backend for tests.
//!
//! Replay matches requests by a stable fingerprint over the canonicalized
//! request (messages + temperature + model id). A replay miss is a regression
//! signal that some prompt template changed, so it is surfaced as an error
//! rather than patched over.

use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default sampling temperature for all agent calls.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;
/// Default completion budget per call.
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;
/// Default backbone model id; overridable per run.
pub const DEFAULT_MODEL_ID: &str = "gpt-4.1";

const CASSETTE_FORMAT_VERSION: u32 = 1;
const MAX_TRANSPORT_ATTEMPTS: u32 = 3;
const RETRY_BASE_DELAY: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// Model id, temperature, and output budget shared by every agent call in a
/// pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            model_id: DEFAULT_MODEL_ID.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

/// One chat-completion request. The first message is always the system
/// message; construction enforces it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn new(settings: &ModelSettings, system: impl Into<String>) -> Self {
        ChatRequest {
            model_id: settings.model_id.clone(),
            temperature: settings.temperature,
            max_output_tokens: settings.max_output_tokens,
            messages: vec![ChatMessage {
                role: Role::System,
                content: system.into(),
            }],
        }
    }

    pub fn with_user(mut self, content: impl Into<String>) -> Self {
        self.messages.push(ChatMessage {
            role: Role::User,
            content: content.into(),
        });
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("empty message list".into()));
        }
        if self.messages[0].role != Role::System {
            return Err(ProviderError::InvalidRequest(
                "first message must be the system message".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Stable hash of the canonicalized request: model id, temperature, and
    /// the role-tagged message list. Output-token budget is excluded so a
    /// budget tweak does not invalidate recorded cassettes.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.model_id.as_bytes());
        hasher.update([0x1e]);
        hasher.update(format!("{}", self.temperature).as_bytes());
        for msg in &self.messages {
            hasher.update([0x1e]);
            hasher.update(msg.role.as_str().as_bytes());
            hasher.update([0x1f]);
            hasher.update(msg.content.as_bytes());
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    fn summary(&self) -> String {
        let last_user = self
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        last_user.chars().take(80).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub provider_latency: Duration,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("replay miss: fingerprint {fingerprint} not in cassette")]
    ReplayMiss { fingerprint: String },
    #[error("cassette {path}: {message}")]
    Cassette { path: String, message: String },
    #[error("live backend not configured: {0}")]
    NotConfigured(String),
}

/// One recorded request/response pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub fingerprint: String,
    /// First 80 chars of the last user message, for human inspection only.
    pub summary: String,
    pub text: String,
}

/// An ordered store of recorded responses. Lookup is exact-match on the
/// request fingerprint; the first matching entry wins, so replaying the same
/// request always yields the same response.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    pub entries: Vec<CassetteEntry>,
}

impl Cassette {
    pub fn new() -> Self {
        Cassette {
            version: CASSETTE_FORMAT_VERSION,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, request: &ChatRequest, text: impl Into<String>) {
        self.entries.push(CassetteEntry {
            fingerprint: request.fingerprint(),
            summary: request.summary(),
            text: text.into(),
        });
    }

    pub fn lookup(&self, fingerprint: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.fingerprint == fingerprint)
            .map(|e| e.text.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load(path: &Path) -> Result<Cassette, ProviderError> {
        let text = fs::read_to_string(path).map_err(|e| ProviderError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let cassette: Cassette =
            serde_json::from_str(&text).map_err(|e| ProviderError::Cassette {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if cassette.version != CASSETTE_FORMAT_VERSION {
            return Err(ProviderError::Cassette {
                path: path.display().to_string(),
                message: format!(
                    "unsupported format version {} (expected {})",
                    cassette.version, CASSETTE_FORMAT_VERSION
                ),
            });
        }
        Ok(cassette)
    }

    pub fn save(&self, path: &Path) -> Result<(), ProviderError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| ProviderError::Cassette {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        let json = serde_json::to_string_pretty(self).map_err(|e| ProviderError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        fs::write(path, json).map_err(|e| ProviderError::Cassette {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

type ScriptFn = dyn Fn(&ChatRequest) -> Result<String, String> + Send + Sync;

enum Backend {
    Live {
        agent: ureq::Agent,
        base_url: String,
        api_key: Option<String>,
    },
    Replay(Cassette),
    /// Test/generation backend: a pure function of the request.
    Scripted(Box<ScriptFn>),
}

/// Shared chat-completion endpoint. Safe to use from concurrently running
/// task pipelines; recording appends are serialized internally.
pub struct Provider {
    backend: Backend,
    recorder: Option<Mutex<Cassette>>,
}

impl Provider {
    pub fn live(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        Provider {
            backend: Backend::Live {
                agent,
                base_url: base_url.into(),
                api_key,
            },
            recorder: None,
        }
    }

    pub fn replay(cassette: Cassette) -> Self {
        Provider {
            backend: Backend::Replay(cassette),
            recorder: None,
        }
    }

    pub fn replay_from(path: &Path) -> Result<Self, ProviderError> {
        Ok(Self::replay(Cassette::load(path)?))
    }

    /// Backend driven by a function of the request; used by tests and the
    /// fixture generator.
    pub fn scripted<F>(script: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, String> + Send + Sync + 'static,
    {
        Provider {
            backend: Backend::Scripted(Box::new(script)),
            recorder: None,
        }
    }

    /// Enables recording; every completed call is appended to an internal
    /// cassette retrievable via [`Provider::recording`].
    pub fn with_recording(mut self) -> Self {
        self.recorder = Some(Mutex::new(Cassette::new()));
        self
    }

    /// Snapshot of everything recorded so far.
    pub fn recording(&self) -> Option<Cassette> {
        self.recorder
            .as_ref()
            .map(|m| m.lock().expect("recorder poisoned").clone())
    }

    pub fn save_recording(&self, path: &Path) -> Result<(), ProviderError> {
        match self.recording() {
            Some(cassette) => cassette.save(path),
            None => Ok(()),
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate()?;
        let response = match &self.backend {
            Backend::Replay(cassette) => {
                let fingerprint = request.fingerprint();
                let text = cassette
                    .lookup(&fingerprint)
                    .ok_or(ProviderError::ReplayMiss { fingerprint })?;
                ChatResponse {
                    text: text.to_string(),
                    usage: None,
                    provider_latency: Duration::ZERO,
                }
            }
            Backend::Scripted(script) => {
                let text = script(request).map_err(ProviderError::MalformedResponse)?;
                ChatResponse {
                    text,
                    usage: None,
                    provider_latency: Duration::ZERO,
                }
            }
            Backend::Live {
                agent,
                base_url,
                api_key,
            } => live_complete(agent, base_url, api_key.as_deref(), request)?,
        };
        if let Some(recorder) = &self.recorder {
            recorder
                .lock()
                .expect("recorder poisoned")
                .record(request, response.text.clone());
        }
        Ok(response)
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireChoiceMessage,
}

#[derive(Deserialize)]
struct WireChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Option<Vec<WireChoice>>,
    usage: Option<WireUsage>,
}

fn live_complete(
    agent: &ureq::Agent,
    base_url: &str,
    api_key: Option<&str>,
    request: &ChatRequest,
) -> Result<ChatResponse, ProviderError> {
    let url = format!("{}/chat/completions", base_url.trim_end_matches('/'));
    let body = WireRequest {
        model: &request.model_id,
        temperature: request.temperature,
        max_tokens: request.max_output_tokens,
        messages: request
            .messages
            .iter()
            .map(|m| WireMessage {
                role: m.role.as_str(),
                content: &m.content,
            })
            .collect(),
    };

    let started = Instant::now();
    let mut last_error = String::new();
    for attempt in 0..MAX_TRANSPORT_ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(RETRY_BASE_DELAY * 2u32.pow(attempt - 1));
        }
        let mut call = agent.post(&url).set("Content-Type", "application/json");
        if let Some(key) = api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        match call.send_json(&body) {
            Ok(response) => {
                let text = response.into_string().map_err(|e| {
                    ProviderError::MalformedResponse(format!("unreadable body: {e}"))
                })?;
                return parse_wire_response(&text, started.elapsed());
            }
            Err(ureq::Error::Status(status, response)) => {
                let body_text = response.into_string().unwrap_or_default();
                // Retry only throttling and server-side failures.
                if status == 429 || status >= 500 {
                    last_error = format!("HTTP {status}");
                    continue;
                }
                return Err(ProviderError::Http {
                    status,
                    body: body_text,
                });
            }
            Err(ureq::Error::Transport(t)) => {
                last_error = t.to_string();
                continue;
            }
        }
    }
    Err(ProviderError::Transport {
        attempts: MAX_TRANSPORT_ATTEMPTS,
        message: last_error,
    })
}

fn parse_wire_response(text: &str, latency: Duration) -> Result<ChatResponse, ProviderError> {
    let wire: WireResponse =
        serde_json::from_str(text).map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
    let content = wire
        .choices
        .and_then(|mut c| {
            if c.is_empty() {
                None
            } else {
                Some(c.remove(0))
            }
        })
        .and_then(|c| c.message.content)
        .ok_or_else(|| ProviderError::MalformedResponse("no choices in response".into()))?;
    let usage = wire.usage.and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.prompt_tokens?,
            completion_tokens: u.completion_tokens?,
        })
    });
    Ok(ChatResponse {
        text: content,
        usage,
        provider_latency: latency,
    })
}
