//! One completion interface over a chat-completion endpoint, with
//! record/replay through a fingerprint-keyed transcript store.
//!
//! | mode   | network | store          |
//! |--------|---------|----------------|
//! | live   | yes     | untouched      |
//! | record | yes     | written        |
//! | replay | never   | read only      |

mod http;
mod scripted;
mod store;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{
    EmbeddingClient, HttpChatModel, HttpResponse, HttpTransport, ReqwestTransport, RetryPolicy, TransportFailure,
    API_KEY_ENV,
};
pub use scripted::ScriptedModel;
pub use store::{StoreEntry, TranscriptStore};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("replay cache miss for fingerprint {0}")]
    CacheMiss(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("api error {status}: {body}")]
    Api { status: u16, body: String },
    #[error("prompt too large: ~{estimated_tokens} tokens exceeds budget {budget_tokens}")]
    PromptTooLarge { estimated_tokens: usize, budget_tokens: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transcript store: {0}")]
    Store(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("scripted model has no reply for request {0}")]
    ScriptExhausted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system: String,
    pub user: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl PromptRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, model_name: impl Into<String>) -> Self {
        PromptRequest {
            system: system.into(),
            user: user.into(),
            model_name: model_name.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Rough size: one token per four characters of system + user text.
    pub fn estimated_tokens(&self) -> usize {
        (self.system.chars().count() + self.user.chars().count()).div_ceil(4)
    }
}

fn canonical_number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Sorted-key JSON of the request with normalized numbers.
pub fn canonical_request_json(request: &PromptRequest) -> String {
    let s = |v: &str| serde_json::to_string(v).expect("strings always serialize");
    format!(
        "{{\"max_output_tokens\":{},\"model_name\":{},\"system\":{},\"temperature\":{},\"user\":{}}}",
        request.max_output_tokens,
        s(&request.model_name),
        s(&request.system),
        canonical_number(request.temperature),
        s(&request.user),
    )
}

/// Hex SHA-256 of the canonical request serialization.
pub fn request_fingerprint(request: &PromptRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"prompt-request/v1\n");
    hasher.update(canonical_request_json(request).as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionSource {
    Live,
    Cache,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    pub source: CompletionSource,
}

/// Anything that turns a prompt into a completion.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError>;
}

impl<T: LanguageModel + ?Sized> LanguageModel for Arc<T> {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::Replay => "replay",
        })
    }
}

impl FromStr for GatewayMode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            other => Err(GatewayError::Config(format!("unknown gateway mode {other:?}"))),
        }
    }
}

/// Counting semaphore bounding concurrent upstream calls.
struct InFlight {
    max: usize,
    current: Mutex<usize>,
    freed: Condvar,
}

struct InFlightGuard<'a>(&'a InFlight);

impl InFlight {
    fn new(max: usize) -> Self {
        InFlight {
            max: max.max(1),
            current: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut current = self.current.lock().unwrap_or_else(|e| e.into_inner());
        while *current >= self.max {
            current = self.freed.wait(current).unwrap_or_else(|e| e.into_inner());
        }
        *current += 1;
        InFlightGuard(self)
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut current = self.0.current.lock().unwrap_or_else(|e| e.into_inner());
        *current -= 1;
        self.0.freed.notify_one();
    }
}

/// Mode-switching front end. In replay mode the upstream is never touched,
/// and may be absent.
pub struct Gateway {
    mode: GatewayMode,
    store: Arc<TranscriptStore>,
    upstream: Option<Arc<dyn LanguageModel>>,
    prompt_budget_tokens: Option<usize>,
    in_flight: InFlight,
}

impl Gateway {
    pub fn new(mode: GatewayMode, store: Arc<TranscriptStore>, upstream: Option<Arc<dyn LanguageModel>>) -> Result<Self, GatewayError> {
        if mode != GatewayMode::Replay && upstream.is_none() {
            return Err(GatewayError::Config(format!("{mode} mode needs an upstream model")));
        }
        Ok(Gateway {
            mode,
            store,
            upstream,
            prompt_budget_tokens: None,
            in_flight: InFlight::new(4),
        })
    }

    pub fn replay(store: Arc<TranscriptStore>) -> Self {
        Self::new(GatewayMode::Replay, store, None).expect("replay needs no upstream")
    }

    pub fn with_prompt_budget(mut self, budget_tokens: usize) -> Self {
        self.prompt_budget_tokens = Some(budget_tokens);
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.in_flight = InFlight::new(max);
        self
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn store(&self) -> &Arc<TranscriptStore> {
        &self.store
    }

    fn upstream(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        let upstream = self.upstream.as_ref().ok_or_else(|| GatewayError::Config("no upstream model".into()))?;
        let _slot = self.in_flight.acquire();
        upstream.complete(request)
    }
}

impl LanguageModel for Gateway {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        request.validate()?;
        if let Some(budget) = self.prompt_budget_tokens {
            let estimated = request.estimated_tokens();
            if estimated > budget {
                return Err(GatewayError::PromptTooLarge {
                    estimated_tokens: estimated,
                    budget_tokens: budget,
                });
            }
        }
        let fingerprint = request_fingerprint(request);
        match self.mode {
            GatewayMode::Replay => {
                let entry = self.store.get(&fingerprint).ok_or(GatewayError::CacheMiss(fingerprint))?;
                Ok(Completion {
                    source: CompletionSource::Cache,
                    ..entry.completion
                })
            }
            GatewayMode::Live => self.upstream(request),
            GatewayMode::Record => {
                let completion = self.upstream(request)?;
                self.store.insert(StoreEntry::new(fingerprint, request.clone(), completion.clone()))?;
                Ok(completion)
            }
        }
    }
}
