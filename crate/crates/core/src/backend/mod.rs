//! Completion backends and cost metering.
//!
//! Every model call in a pipeline goes through [`LlmBackend::complete`]. Two
//! implementations ship: [`HttpBackend`] for OpenAI-style chat-completions
//! endpoints and [`ScriptedBackend`] for deterministic offline runs.

mod http;
mod ledger;
mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use ledger::{ledger_total, CostLedger, LedgerEntry, ModelPrice, PriceTable, PricingError};
pub use scripted::{estimate_tokens, Fallback, Matcher, ScriptError, ScriptRule, ScriptedBackend};

/// One system+user exchange with a chat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    /// Agent name plus sequence position, for transcripts.
    pub request_tag: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.user_text.is_empty() {
            return Err(BackendError::InvalidRequest {
                tag: self.request_tag.clone(),
                message: "user text is empty".into(),
            });
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest {
                tag: self.request_tag.clone(),
                message: format!("temperature {} outside [0, 2]", self.temperature),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("{tag}: gave up after {attempts} attempts: {message}")]
    Exhausted {
        tag: String,
        attempts: u32,
        message: String,
        timed_out: bool,
    },
    #[error("{tag}: HTTP {status}: {body}")]
    Status { tag: String, status: u16, body: String },
    #[error("{tag}: malformed response: {message}")]
    Protocol { tag: String, message: String },
    #[error("{tag}: timed out")]
    Timeout { tag: String },
    #[error("{tag}: no script rule matched and the fallback is `error`")]
    Unscripted { tag: String },
    #[error("{tag}: invalid request: {message}")]
    InvalidRequest { tag: String, message: String },
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
}

impl BackendError {
    pub fn is_timeout(&self) -> bool {
        matches!(
            self,
            BackendError::Timeout { .. } | BackendError::Exhausted { timed_out: true, .. }
        )
    }
}

/// A chat-completion provider. Implementations must tolerate concurrent
/// in-flight calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for &T {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<T: LlmBackend + ?Sized> LlmBackend for Box<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

/// A (request, response) pair as persisted in run transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: ChatRequest,
    pub response: ChatResponse,
}
