//! Chat-completion backends taking interleaved text and images.

mod remote;
mod scripted;

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use remote::RemoteBackend;
pub use scripted::{record_replay, ScriptEntry, ScriptedBackend, ScriptedExchange, TranscriptStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// The prompting phase a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTag {
    Planning,
    Acting,
    Reflecting,
}

impl PhaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseTag::Planning => "planning",
            PhaseTag::Acting => "acting",
            PhaseTag::Reflecting => "reflecting",
        }
    }
}

impl fmt::Display for PhaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, PartialEq, Eq)]
pub enum Part {
    Text(String),
    Image {
        png: Vec<u8>,
        width: u32,
        height: u32,
    },
}

impl fmt::Debug for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Part::Text(t) => f.debug_tuple("Text").field(t).finish(),
            Part::Image { png, width, height } => {
                write!(f, "Image({width}x{height}, {} bytes)", png.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatTurn {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl ChatTurn {
    pub fn user(parts: Vec<Part>) -> Self {
        assert!(!parts.is_empty(), "a chat turn needs at least one part");
        Self {
            role: Role::User,
            parts,
        }
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub tag: PhaseTag,
    pub turns: Vec<ChatTurn>,
}

impl CompletionRequest {
    /// All text parts joined with newlines.
    pub fn text(&self) -> String {
        self.turns
            .iter()
            .map(ChatTurn::text)
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Hex SHA-256 of every image part's PNG bytes, in order.
    pub fn image_digests(&self) -> Vec<String> {
        self.turns
            .iter()
            .flat_map(|t| &t.parts)
            .filter_map(|p| match p {
                Part::Image { png, .. } => Some(format!("{:x}", Sha256::digest(png))),
                Part::Text(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("response has no assistant text: {0}")]
    BadResponse(String),
    #[error("script exhausted after {0} responses")]
    ScriptExhausted(usize),
    #[error("script entry {index} expects {expected}, got a {tag} request")]
    MatcherMiss {
        index: usize,
        expected: String,
        tag: PhaseTag,
    },
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Remote,
    #[default]
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Full URL of the chat-completions endpoint.
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_secs: f64,
    /// Script file (JSON list of entries) for the scripted backend.
    pub script: Option<PathBuf>,
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            endpoint: None,
            model: String::new(),
            api_key_env: None,
            max_tokens: 1024,
            temperature: 0.0,
            timeout_secs: 120.0,
            script: None,
            max_in_flight: 4,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.kind {
            BackendKind::Remote if self.endpoint.is_none() => Err(GatewayError::Config(
                "remote backend needs an endpoint".into(),
            )),
            BackendKind::Remote if self.api_key_env.is_none() => Err(GatewayError::Config(
                "remote backend needs api_key_env".into(),
            )),
            BackendKind::Scripted if self.script.is_none() => Err(GatewayError::Config(
                "scripted backend needs a script file".into(),
            )),
            _ if !(self.timeout_secs > 0.0) => {
                Err(GatewayError::Config("timeout must be positive".into()))
            }
            _ if self.max_in_flight == 0 => Err(GatewayError::Config(
                "max_in_flight must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Builds the configured backend.
    pub fn build(&self) -> Result<Arc<dyn ChatBackend>, GatewayError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Remote => Arc::new(RemoteBackend::from_config(self)?),
            BackendKind::Scripted => {
                let path = self.script.as_ref().expect("validated");
                Arc::new(ScriptedBackend::from_file(path)?)
            }
        })
    }
}

/// One logged request, written before the response is awaited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub seq: u64,
    pub tag: PhaseTag,
    pub sent_at_ms: u128,
    pub prompt: String,
    pub image_digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub seq: u64,
    pub received_at_ms: u128,
    pub response: Option<String>,
    pub error: Option<String>,
}

pub trait RequestLog: Send + Sync {
    fn request(&self, record: &RequestRecord);
    fn response(&self, record: &ResponseRecord);
}

/// Keeps every record in memory.
#[derive(Debug, Default)]
pub struct MemoryLog {
    pub requests: Mutex<Vec<RequestRecord>>,
    pub responses: Mutex<Vec<ResponseRecord>>,
}

impl RequestLog for MemoryLog {
    fn request(&self, record: &RequestRecord) {
        self.requests.lock().unwrap().push(record.clone());
    }

    fn response(&self, record: &ResponseRecord) {
        self.responses.lock().unwrap().push(record.clone());
    }
}

/// Appends one JSON line per record and flushes it immediately.
pub struct JsonlLog {
    file: Mutex<File>,
}

impl JsonlLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            file: Mutex::new(file),
        })
    }

    fn write(&self, kind: &str, value: serde_json::Value) {
        let line = serde_json::json!({ "kind": kind, "record": value });
        let mut f = self.file.lock().unwrap();
        if let Err(e) = writeln!(f, "{line}").and_then(|_| f.sync_data()) {
            tracing::warn!("request log write failed: {e}");
        }
    }
}

impl RequestLog for JsonlLog {
    fn request(&self, record: &RequestRecord) {
        self.write("request", serde_json::to_value(record).unwrap());
    }

    fn response(&self, record: &ResponseRecord) {
        self.write("response", serde_json::to_value(record).unwrap());
    }
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

/// A shareable backend with request logging and an in-flight cap.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    slots: Arc<Slots>,
    seq: Arc<Mutex<u64>>,
    log: Option<Arc<dyn RequestLog>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, max_in_flight: usize) -> Self {
        assert!(max_in_flight > 0);
        Self {
            backend,
            slots: Arc::new(Slots {
                free: Mutex::new(max_in_flight),
                cv: Condvar::new(),
            }),
            seq: Arc::new(Mutex::new(0)),
            log: None,
        }
    }

    pub fn with_log(mut self, log: Arc<dyn RequestLog>) -> Self {
        self.log = Some(log);
        self
    }

    /// Same backend, cap and sequence counter, different log.
    pub fn relogged(&self, log: Arc<dyn RequestLog>) -> Self {
        Self {
            log: Some(log),
            ..self.clone()
        }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let _slot = self.slots.acquire();
        let seq = {
            let mut s = self.seq.lock().unwrap();
            *s += 1;
            *s
        };
        if let Some(log) = &self.log {
            log.request(&RequestRecord {
                seq,
                tag: request.tag,
                sent_at_ms: now_ms(),
                prompt: request.text(),
                image_digests: request.image_digests(),
            });
        }
        let result = self.backend.complete(request);
        if let Some(log) = &self.log {
            let (response, error) = match &result {
                Ok(t) => (Some(t.clone()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            log.response(&ResponseRecord {
                seq,
                received_at_ms: now_ms(),
                response,
                error,
            });
        }
        result
    }
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway").finish_non_exhaustive()
    }
}
