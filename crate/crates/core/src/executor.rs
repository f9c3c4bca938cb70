//! Runs a component sequence on one task.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{CostLedger, LlmBackend, PriceTable, PricingError};
use crate::components::{run_component, AgentProfile, CallRecord, Message, PromptCatalog, RunError, Session, TaskContext};
use crate::grammar::{ComponentSequence, ComponentTerm};

/// Hex SHA-256 of a message body.
pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn digest_all(messages: &[Message]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(m.content.as_bytes());
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub position: usize,
    pub term: ComponentTerm,
    /// Digest over all input bodies in order.
    pub inputs_digest: String,
    pub output_digests: Vec<String>,
    pub calls: usize,
}

#[derive(Debug, Clone)]
pub struct ExecutionResult {
    pub final_answer: Message,
    pub trace: Vec<TraceEntry>,
    pub calls: Vec<CallRecord>,
    pub ledger: CostLedger,
}

impl ExecutionResult {
    pub fn call_count(&self) -> usize {
        self.calls.len()
    }

    pub fn cost(&self) -> Result<f64, PricingError> {
        self.ledger.total()
    }
}

/// A run that stopped early. Calls made before the failure are kept for
/// accounting.
#[derive(Debug)]
pub struct ExecutionFailure {
    pub error: RunError,
    pub calls: Vec<CallRecord>,
    pub ledger: CostLedger,
}

impl ExecutionFailure {
    pub fn is_timeout(&self) -> bool {
        self.error.is_timeout()
    }
}

impl std::fmt::Display for ExecutionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} calls)", self.error, self.calls.len())
    }
}

impl std::error::Error for ExecutionFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Checks message cardinalities along the sequence without calling the
/// model: reasoners take at most one input, single-stream refinement exactly
/// one, multi-stream components at least two, aggregators at least one, and
/// the sequence must end on a single message.
pub fn check_cardinality(sequence: &ComponentSequence) -> Result<(), RunError> {
    let mut n = 0usize;
    for term in sequence.terms() {
        let (ok, expected, out) = match *term {
            ComponentTerm::StepByStepReasoner { count } | ComponentTerm::RoleBasedReasoner { count } => {
                (n <= 1, "at most one", count.get() as usize)
            }
            ComponentTerm::SelfCriticIteration { .. } => (n == 1, "exactly one", 1),
            ComponentTerm::MultiSelfCriticIteration { .. } | ComponentTerm::DebateIteration { .. } => {
                (n >= 2, "at least two", n)
            }
            ComponentTerm::MajorityVoter | ComponentTerm::ConsensusBuilder => (n >= 1, "at least one", 1),
        };
        if !ok {
            return Err(RunError::Arity {
                component: term.to_string(),
                expected,
                got: n,
            });
        }
        n = out;
    }
    if n != 1 {
        return Err(RunError::Arity {
            component: "final answer".into(),
            expected: "exactly one",
            got: n,
        });
    }
    Ok(())
}

#[derive(Clone)]
pub struct Executor<'a> {
    backend: &'a dyn LlmBackend,
    model: String,
    prompts: PromptCatalog,
    prices: PriceTable,
}

impl<'a> Executor<'a> {
    pub fn new(backend: &'a dyn LlmBackend, model: &str) -> Self {
        Self {
            backend,
            model: model.to_string(),
            prompts: PromptCatalog::default(),
            prices: PriceTable::default(),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptCatalog) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_prices(mut self, prices: PriceTable) -> Self {
        self.prices = prices;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn backend(&self) -> &'a dyn LlmBackend {
        self.backend
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    /// Runs `sequence` left to right on `task`. No call is issued once
    /// `deadline` has passed.
    #[allow(clippy::result_large_err)]
    pub fn execute(
        &self,
        sequence: &ComponentSequence,
        task: &TaskContext,
        deadline: Option<Instant>,
    ) -> Result<ExecutionResult, ExecutionFailure> {
        let mut session = Session::new(self.backend, &self.model, &self.prompts)
            .with_prices(self.prices.clone())
            .with_deadline(deadline);
        if let Err(error) = check_cardinality(sequence) {
            let (calls, ledger) = session.into_parts();
            return Err(ExecutionFailure { error, calls, ledger });
        }
        let mut messages: Vec<Message> = Vec::new();
        let mut agents: Vec<AgentProfile> = Vec::new();
        let mut trace = Vec::with_capacity(sequence.len());
        for (position, &term) in sequence.terms().iter().enumerate() {
            session.set_position(position);
            let before = session.calls().len();
            let output = match run_component(&mut session, term, task, &messages, &agents) {
                Ok(output) => output,
                Err(error) => {
                    let (calls, ledger) = session.into_parts();
                    return Err(ExecutionFailure { error, calls, ledger });
                }
            };
            trace.push(TraceEntry {
                position,
                term,
                inputs_digest: digest_all(&messages),
                output_digests: output.messages.iter().map(|m| digest(&m.content)).collect(),
                calls: session.calls().len() - before,
            });
            messages = output.messages;
            agents = output.agents;
        }
        let final_answer = messages.pop().expect("cardinality checked");
        let (calls, ledger) = session.into_parts();
        Ok(ExecutionResult {
            final_answer,
            trace,
            calls,
            ledger,
        })
    }
}
