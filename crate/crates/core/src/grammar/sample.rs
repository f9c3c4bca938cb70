use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sequence::ComponentSequence;
use super::spec::{GrammarSpec, Symbol};

pub const DEFAULT_MAX_DEPTH: usize = 16;
pub const DEFAULT_RESAMPLE_BUDGET: usize = 10_000;

/// Limits for random derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Maximum production applications in one derivation attempt.
    pub max_depth: usize,
    /// Attempts before giving up.
    pub resample_budget: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            resample_budget: DEFAULT_RESAMPLE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("no complete derivation within {attempts} attempts of at most {max_depth} rule applications")]
    BudgetExhausted { attempts: usize, max_depth: usize },
}

/// Derives a random sequence, choosing uniformly among the alternatives of
/// the leftmost nonterminal. Attempts that need more than `max_depth`
/// applications are thrown away and restarted from the start symbol.
pub fn sample<R: Rng + ?Sized>(
    grammar: &GrammarSpec,
    rng: &mut R,
    config: SampleConfig,
) -> Result<ComponentSequence, SampleError> {
    for _ in 0..config.resample_budget {
        if let Some(seq) = attempt(grammar, rng, config.max_depth) {
            return Ok(seq);
        }
    }
    Err(SampleError::BudgetExhausted {
        attempts: config.resample_budget,
        max_depth: config.max_depth,
    })
}

/// [`sample`] with a fresh ChaCha8 stream seeded from `seed`.
pub fn sample_seeded(
    grammar: &GrammarSpec,
    seed: u64,
    config: SampleConfig,
) -> Result<ComponentSequence, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(grammar, &mut rng, config)
}

fn attempt<R: Rng + ?Sized>(
    grammar: &GrammarSpec,
    rng: &mut R,
    max_depth: usize,
) -> Option<ComponentSequence> {
    let mut stack = vec![Symbol::NonTerminal(grammar.start())];
    let mut terms = Vec::new();
    let mut applications = 0;
    while let Some(symbol) = stack.pop() {
        match symbol {
            Symbol::Terminal(t) => terms.push(t),
            Symbol::NonTerminal(nt) => {
                applications += 1;
                if applications > max_depth {
                    return None;
                }
                let alternatives = grammar.alternatives(nt);
                let pick = alternatives[rng.random_range(0..alternatives.len())];
                stack.extend(grammar.production(pick).body.iter().rev().copied());
            }
        }
    }
    ComponentSequence::new(terms)
}
