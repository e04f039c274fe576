use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::{Completion, CompletionSource, GatewayError, LanguageModel, PromptRequest, Usage};

pub const API_KEY_ENV: &str = "TRACE_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout(String),
    Connection(String),
}

impl fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportFailure::Timeout(m) => write!(f, "timeout: {m}"),
            TransportFailure::Connection(m) => write!(f, "connection: {m}"),
        }
    }
}

/// A single JSON POST. Injectable so tests never open sockets.
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<HttpResponse, TransportFailure>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<HttpResponse, TransportFailure> {
        let mut builder = self
            .client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(token) = bearer {
            builder = builder.bearer_auth(token);
        }
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                TransportFailure::Timeout(e.without_url().to_string())
            } else {
                TransportFailure::Connection(e.without_url().to_string())
            }
        };
        let response = builder.send().map_err(classify)?;
        let status = response.status().as_u16();
        let body = response.text().map_err(classify)?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << attempt.min(16))
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// POSTs `body` with retries on 429, 5xx and transport failures.
fn post_with_retries(
    transport: &dyn HttpTransport,
    url: &str,
    bearer: Option<&str>,
    body: &str,
    policy: RetryPolicy,
) -> Result<String, GatewayError> {
    let mut last = String::new();
    for attempt in 0..=policy.max_retries {
        if attempt > 0 {
            let delay = policy.delay(attempt - 1);
            log::warn!("retrying after {last}; attempt {attempt} in {delay:?}");
            std::thread::sleep(delay);
        }
        match transport.post_json(url, bearer, body) {
            Ok(resp) if (200..300).contains(&resp.status) => return Ok(resp.body),
            Ok(resp) if retryable(resp.status) => last = format!("status {}", resp.status),
            Ok(resp) => {
                return Err(GatewayError::Api {
                    status: resp.status,
                    body: resp.body,
                })
            }
            Err(failure) => last = failure.to_string(),
        }
    }
    Err(GatewayError::Transport(format!(
        "{} attempts failed, last: {last}",
        policy.max_retries + 1
    )))
}

fn read_api_key() -> Result<String, GatewayError> {
    match std::env::var(API_KEY_ENV) {
        Ok(key) if !key.is_empty() => Ok(key),
        _ => Err(GatewayError::Config(format!("environment variable {API_KEY_ENV} is not set"))),
    }
}

/// Chat-completion client: system + user messages, first choice text back.
pub struct HttpChatModel {
    endpoint: String,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
    retry: RetryPolicy,
}

impl fmt::Debug for HttpChatModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpChatModel")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("retry", &self.retry)
            .finish()
    }
}

impl HttpChatModel {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, transport: Arc<dyn HttpTransport>) -> Self {
        HttpChatModel {
            endpoint: endpoint.into(),
            api_key,
            transport,
            retry: RetryPolicy::default(),
        }
    }

    /// Reads the key from the environment.
    pub fn from_env(endpoint: impl Into<String>, transport: Arc<dyn HttpTransport>) -> Result<Self, GatewayError> {
        Ok(Self::new(endpoint, Some(read_api_key()?), transport))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn request_body(request: &PromptRequest) -> Value {
        json!({
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        })
    }

    pub fn parse_reply(body: &str) -> Result<Completion, GatewayError> {
        let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::Transport(format!("reply is not JSON: {e}")))?;
        let choice = v
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| GatewayError::Transport("reply has no choices".into()))?;
        let text = choice
            .get("message")
            .and_then(|m| m.get("content"))
            .or_else(|| choice.get("text"))
            .map(|t| t.as_str().unwrap_or_default().to_string())
            .ok_or_else(|| GatewayError::Transport("first choice has no text".into()))?;
        let usage = v.get("usage").and_then(|u| {
            Some(Usage {
                prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
                completion_tokens: u.get("completion_tokens")?.as_u64()?,
            })
        });
        Ok(Completion {
            text,
            usage,
            source: CompletionSource::Live,
        })
    }
}

impl LanguageModel for HttpChatModel {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        let body = Self::request_body(request).to_string();
        let reply = post_with_retries(&*self.transport, &self.endpoint, self.api_key.as_deref(), &body, self.retry)?;
        Self::parse_reply(&reply)
    }
}

/// Embedding endpoint client: `{model, input: [...]}` in, `data[i].embedding` out.
pub struct EmbeddingClient {
    endpoint: String,
    model_name: String,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
    retry: RetryPolicy,
}

impl fmt::Debug for EmbeddingClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingClient")
            .field("endpoint", &self.endpoint)
            .field("model_name", &self.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl EmbeddingClient {
    pub fn new(
        endpoint: impl Into<String>,
        model_name: impl Into<String>,
        api_key: Option<String>,
        transport: Arc<dyn HttpTransport>,
    ) -> Self {
        EmbeddingClient {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            api_key,
            transport,
            retry: RetryPolicy::default(),
        }
    }

    pub fn from_env(
        endpoint: impl Into<String>,
        model_name: impl Into<String>,
        transport: Arc<dyn HttpTransport>,
    ) -> Result<Self, GatewayError> {
        Ok(Self::new(endpoint, model_name, Some(read_api_key()?), transport))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let body = json!({"model": self.model_name, "input": inputs}).to_string();
        let reply = post_with_retries(&*self.transport, &self.endpoint, self.api_key.as_deref(), &body, self.retry)?;
        let v: Value = serde_json::from_str(&reply).map_err(|e| GatewayError::Transport(format!("reply is not JSON: {e}")))?;
        let data = v
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::Transport("embedding reply has no data".into()))?;
        if data.len() != inputs.len() {
            return Err(GatewayError::Transport(format!(
                "expected {} embeddings, got {}",
                inputs.len(),
                data.len()
            )));
        }
        data.iter()
            .map(|item| {
                item.get("embedding")
                    .and_then(Value::as_array)
                    .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
                    .ok_or_else(|| GatewayError::Transport("malformed embedding vector".into()))
            })
            .collect()
    }
}
