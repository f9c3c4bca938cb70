use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::message::{format_inputs, AgentProfile, Message};
use super::prompts::PromptCatalog;
use crate::backend::{BackendError, ChatRequest, CostLedger, Exchange, LlmBackend, PriceTable};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("deadline passed before call at position {position}")]
    Deadline { position: usize },
    #[error("{component} expects {expected} input(s), got {got}")]
    Arity {
        component: String,
        expected: &'static str,
        got: usize,
    },
}

impl RunError {
    pub fn is_timeout(&self) -> bool {
        match self {
            RunError::Deadline { .. } => true,
            RunError::Backend(e) => e.is_timeout(),
            RunError::Arity { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    /// Index of the component within the sequence.
    pub position: usize,
    pub exchange: Exchange,
}

/// Per-run call context: routes agent calls to the backend, enforces the
/// deadline and keeps the transcript and cost ledger.
pub struct Session<'a> {
    backend: &'a dyn LlmBackend,
    model: String,
    prompts: &'a PromptCatalog,
    deadline: Option<Instant>,
    position: usize,
    calls: Vec<CallRecord>,
    ledger: CostLedger,
}

impl<'a> Session<'a> {
    pub fn new(backend: &'a dyn LlmBackend, model: &str, prompts: &'a PromptCatalog) -> Self {
        Self {
            backend,
            model: model.to_string(),
            prompts,
            deadline: None,
            position: 0,
            calls: Vec::new(),
            ledger: CostLedger::new(PriceTable::default()),
        }
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_prices(mut self, prices: PriceTable) -> Self {
        self.ledger = CostLedger::new(prices);
        self
    }

    pub fn prompts(&self) -> &PromptCatalog {
        self.prompts
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn set_position(&mut self, position: usize) {
        self.position = position;
    }

    pub fn calls(&self) -> &[CallRecord] {
        &self.calls
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn into_parts(self) -> (Vec<CallRecord>, CostLedger) {
        (self.calls, self.ledger)
    }

    /// One model call: `inputs` rendered as context, then `instruction`.
    /// The reply becomes an `answer` message authored by `agent`.
    pub fn ask(
        &mut self,
        agent: &AgentProfile,
        inputs: &[Message],
        instruction: &str,
        iteration_idx: i32,
    ) -> Result<Message, RunError> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(RunError::Deadline {
                position: self.position,
            });
        }
        let mut request_tag = format!("{}:{}", self.position, agent.display_name);
        if iteration_idx >= 0 {
            request_tag.push_str(&format!(":r{iteration_idx}"));
        }
        let request = ChatRequest {
            model: self.model.clone(),
            system_text: agent.system_text(),
            user_text: format_inputs(inputs) + instruction,
            temperature: agent.temperature,
            request_tag,
        };
        let response = self.backend.complete(&request)?;
        self.ledger.record(&request.request_tag, &response);
        let message = Message::new("answer", &agent.display_name, &response.content, iteration_idx);
        self.calls.push(CallRecord {
            position: self.position,
            exchange: Exchange { request, response },
        });
        Ok(message)
    }
}
