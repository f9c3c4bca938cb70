use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{BackendError, ChatRequest, ChatResponse, LlmBackend};

/// Exponential backoff: attempt `k` (0-based) waits `base * 2^k` plus up to
/// `base` of jitter, capped at `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base: Duration::from_secs(1),
            cap: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self.base.saturating_mul(1u32 << attempt.min(20));
        let jitter = if self.base.is_zero() {
            Duration::ZERO
        } else {
            self.base.mul_f64(rand::rng().random::<f64>())
        };
        (exp + jitter).min(self.cap)
    }
}

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub api_key: String,
    pub retry: RetryPolicy,
    pub request_timeout: Duration,
    pub max_tokens: Option<u32>,
    /// Maximum in-flight requests.
    pub concurrency: usize,
}

impl HttpConfig {
    pub fn new(endpoint: &str, api_key: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            api_key: api_key.to_string(),
            retry: RetryPolicy::default(),
            request_timeout: Duration::from_secs(120),
            max_tokens: None,
            concurrency: 8,
        }
    }
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate poisoned") += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking client for OpenAI-compatible `/chat/completions` endpoints.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
}

enum Failure {
    Retryable { message: String, timed_out: bool },
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(config.concurrency);
        Self { config, agent, gate }
    }

    /// Reads the credential from `env_var`, failing if it is unset or empty.
    pub fn from_env(endpoint: &str, env_var: &str) -> Result<Self, BackendError> {
        let key = std::env::var(env_var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| BackendError::MissingCredential(env_var.to_string()))?;
        Ok(Self::new(HttpConfig::new(endpoint, &key)))
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, request: &ChatRequest, body: &str) -> Result<ChatResponse, Failure> {
        let tag = &request.request_tag;
        let sent = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .header("Content-Type", "application/json")
            .send(body);
        let mut response = match sent {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => {
                return Err(Failure::Retryable {
                    message: format!("timeout ({t})"),
                    timed_out: true,
                })
            }
            Err(e) => {
                return Err(Failure::Retryable {
                    message: e.to_string(),
                    timed_out: false,
                })
            }
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(t)) => {
                return Err(Failure::Retryable {
                    message: format!("timeout reading body ({t})"),
                    timed_out: true,
                })
            }
            Err(e) => {
                return Err(Failure::Retryable {
                    message: e.to_string(),
                    timed_out: false,
                })
            }
        };
        if status == 429 || (500..600).contains(&status) {
            return Err(Failure::Retryable {
                message: format!("HTTP {status}"),
                timed_out: false,
            });
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(BackendError::Status {
                tag: tag.clone(),
                status,
                body: truncate(&text, 500),
            }));
        }
        parse_response(&text, request).map_err(Failure::Fatal)
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let body = request_body(request, self.config.max_tokens).to_string();
        let _permit = self.gate.acquire();
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = String::new();
        let mut timed_out = false;
        for attempt in 0..attempts {
            match self.attempt(request, &body) {
                Ok(response) => return Ok(response),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable { message, timed_out: t }) => {
                    warn!(tag = %request.request_tag, attempt, %message, "transient backend failure");
                    last = message;
                    timed_out = t;
                    if attempt + 1 < attempts {
                        let delay = self.config.retry.delay(attempt);
                        debug!(?delay, "backing off");
                        thread::sleep(delay);
                    }
                }
            }
        }
        Err(BackendError::Exhausted {
            tag: request.request_tag.clone(),
            attempts,
            message: last,
            timed_out,
        })
    }
}

/// JSON body for a chat-completions call.
pub(crate) fn request_body(request: &ChatRequest, max_tokens: Option<u32>) -> Value {
    let mut body = json!({
        "model": request.model,
        "messages": [
            {"role": "system", "content": request.system_text},
            {"role": "user", "content": request.user_text},
        ],
        "temperature": request.temperature,
    });
    if let Some(max) = max_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// The response's `model` is the requested name, which is the pricing key;
/// servers often answer with a dated snapshot name instead.
pub(crate) fn parse_response(text: &str, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
    let protocol = |message: String| BackendError::Protocol {
        tag: request.request_tag.clone(),
        message,
    };
    let wire: WireResponse = serde_json::from_str(text).map_err(|e| protocol(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| protocol("response has no choices".into()))?;
    let usage = wire.usage.unwrap_or(WireUsage {
        prompt_tokens: 0,
        completion_tokens: 0,
    });
    Ok(ChatResponse {
        content: choice.message.content.unwrap_or_default(),
        prompt_tokens: usage.prompt_tokens,
        completion_tokens: usage.completion_tokens,
        model: request.model.clone(),
    })
}

fn truncate(text: &str, limit: usize) -> String {
    match text.char_indices().nth(limit) {
        Some((i, _)) => format!("{}…", &text[..i]),
        None => text.to_string(),
    }
}
