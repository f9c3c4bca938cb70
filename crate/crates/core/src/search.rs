//! Search over the grammar's language: forced sampling and plain random
//! sampling, both scoring candidates through an [`Evaluator`].
//!
//! One forced iteration is one outer pass: every terminal whose count is
//! at the current minimum gets a fresh sequence containing it. With no
//! skips all counts move together, so `iterations` passes evaluate
//! `iterations * |terminals|` sequences.

use std::collections::{BTreeMap, BTreeSet};
use std::convert::Infallible;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::grammar::{sample, ComponentSequence, ComponentTerm, GrammarSpec, SampleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Forced,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Forced => "forced",
            Strategy::Random => "random",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forced" => Ok(Strategy::Forced),
            "random" => Ok(Strategy::Random),
            other => Err(format!("unknown strategy `{other}` (expected forced or random)")),
        }
    }
}

pub const DEFAULT_ITERATIONS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub iterations: u32,
    pub strategy: Strategy,
    pub seed: u64,
    pub sample: SampleConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            strategy: Strategy::Forced,
            seed: 0,
            sample: SampleConfig::default(),
        }
    }
}

/// Score and spend for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Validation accuracy in `[0, 1]`.
    pub score: f64,
    pub dollars: f64,
    pub calls: usize,
}

impl Evaluation {
    pub fn free(score: f64) -> Self {
        Self {
            score,
            dollars: 0.0,
            calls: 0,
        }
    }
}

/// Scores candidate sequences. An error aborts the search.
pub trait Evaluator {
    type Error: std::error::Error + Send + Sync + 'static;

    fn evaluate(&mut self, sequence: &ComponentSequence) -> Result<Evaluation, Self::Error>;
}

/// Adapts a plain scoring function; every evaluation is free.
pub struct ScoreFn<F>(pub F);

impl<F: FnMut(&ComponentSequence) -> f64> Evaluator for ScoreFn<F> {
    type Error = Infallible;

    fn evaluate(&mut self, sequence: &ComponentSequence) -> Result<Evaluation, Infallible> {
        Ok(Evaluation::free((self.0)(sequence)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    /// 1-based position among evaluations.
    pub evaluation: usize,
    /// 1-based outer iteration.
    pub iteration: u32,
    /// Component that forced this sample; `None` under random search.
    pub forced: Option<ComponentTerm>,
    pub sequence: ComponentSequence,
    pub score: f64,
    pub dollars: f64,
    pub calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub iteration: u32,
    pub forced: Option<ComponentTerm>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub component_counts: BTreeMap<ComponentTerm, u64>,
    pub evaluated: BTreeSet<ComponentSequence>,
    pub scores: BTreeMap<ComponentSequence, f64>,
    pub history: Vec<HistoryRecord>,
    pub skips: Vec<SkipRecord>,
    /// Random-search samples that had already been evaluated.
    pub duplicates: usize,
    /// Dollars spent producing candidates. Sampling makes no model calls.
    pub generation_cost: f64,
    pub validation_cost: f64,
    pub validation_calls: usize,
}

impl SearchState {
    pub fn new(terminals: &[ComponentTerm]) -> Self {
        Self {
            component_counts: terminals.iter().map(|&t| (t, 0)).collect(),
            evaluated: BTreeSet::new(),
            scores: BTreeMap::new(),
            history: Vec::new(),
            skips: Vec::new(),
            duplicates: 0,
            generation_cost: 0.0,
            validation_cost: 0.0,
            validation_calls: 0,
        }
    }

    fn record(&mut self, iteration: u32, forced: Option<ComponentTerm>, sequence: ComponentSequence, e: Evaluation) -> &HistoryRecord {
        self.evaluated.insert(sequence.clone());
        self.scores.insert(sequence.clone(), e.score);
        self.validation_cost += e.dollars;
        self.validation_calls += e.calls;
        self.history.push(HistoryRecord {
            evaluation: self.history.len() + 1,
            iteration,
            forced,
            sequence,
            score: e.score,
            dollars: e.dollars,
            calls: e.calls,
        });
        self.history.last().expect("just pushed")
    }

    pub fn best(&self) -> Option<&HistoryRecord> {
        let mut best: Option<&HistoryRecord> = None;
        for record in &self.history {
            if best.is_none_or(|b| record.score > b.score) {
                best = Some(record);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no sequence has been evaluated")]
pub struct EmptyState;

/// Highest-scoring evaluated sequence, earliest on ties.
pub fn select_best(state: &SearchState) -> Result<&ComponentSequence, EmptyState> {
    state.best().map(|r| &r.sequence).ok_or(EmptyState)
}

/// Progress notifications, in logical order.
#[derive(Debug, Clone, Copy)]
pub enum SearchEvent<'a> {
    Evaluated(&'a HistoryRecord),
    Skipped(&'a SkipRecord),
    Duplicate { iteration: u32, sequence: &'a ComponentSequence },
}

#[derive(Debug, Error)]
pub enum SearchError<E: std::error::Error + 'static> {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("evaluation of `{sequence}` failed: {source}")]
    Evaluator {
        sequence: ComponentSequence,
        #[source]
        source: E,
    },
    #[error("search finished without evaluating any sequence")]
    NothingEvaluated,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: ComponentSequence,
    pub state: SearchState,
}

/// Dispatches on `config.strategy`.
pub fn search<E: Evaluator>(
    grammar: &GrammarSpec,
    config: &SearchConfig,
    evaluator: &mut E,
    observer: &mut dyn FnMut(SearchEvent<'_>),
) -> Result<SearchOutcome, SearchError<E::Error>> {
    match config.strategy {
        Strategy::Forced => forced_search(grammar, config, evaluator, observer),
        Strategy::Random => random_search(grammar, config, evaluator, observer),
    }
}

pub fn forced_search<E: Evaluator>(
    grammar: &GrammarSpec,
    config: &SearchConfig,
    evaluator: &mut E,
    observer: &mut dyn FnMut(SearchEvent<'_>),
) -> Result<SearchOutcome, SearchError<E::Error>> {
    if config.iterations == 0 {
        return Err(SearchError::NoIterations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = SearchState::new(grammar.terminals());
    for iteration in 1..=config.iterations {
        let min = state.component_counts.values().copied().min().unwrap_or(0);
        // grammar terminal order keeps the forcing order stable
        let forced: Vec<ComponentTerm> = grammar
            .terminals()
            .iter()
            .copied()
            .filter(|t| state.component_counts[t] == min)
            .collect();
        debug!(iteration, min, forced = forced.len(), "outer iteration");
        for term in forced {
            let found = find_unseen(grammar, config.sample, &mut rng, &state.evaluated, term);
            let sequence = match found {
                Ok(seq) => seq,
                Err(reason) => {
                    warn!(iteration, %term, %reason, "forcing step skipped");
                    state.skips.push(SkipRecord {
                        iteration,
                        forced: Some(term),
                        reason,
                    });
                    observer(SearchEvent::Skipped(state.skips.last().expect("just pushed")));
                    continue;
                }
            };
            let evaluation = evaluator
                .evaluate(&sequence)
                .map_err(|source| SearchError::Evaluator {
                    sequence: sequence.clone(),
                    source,
                })?;
            *state.component_counts.get_mut(&term).expect("terminal counted") += 1;
            let record = state.record(iteration, Some(term), sequence, evaluation);
            info!(evaluation = record.evaluation, %term, sequence = %record.sequence, score = record.score, "evaluated");
            observer(SearchEvent::Evaluated(record));
        }
    }
    finish(state)
}

pub fn random_search<E: Evaluator>(
    grammar: &GrammarSpec,
    config: &SearchConfig,
    evaluator: &mut E,
    observer: &mut dyn FnMut(SearchEvent<'_>),
) -> Result<SearchOutcome, SearchError<E::Error>> {
    if config.iterations == 0 {
        return Err(SearchError::NoIterations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = SearchState::new(grammar.terminals());
    for iteration in 1..=config.iterations {
        let sequence = match sample(grammar, &mut rng, config.sample) {
            Ok(seq) => seq,
            Err(e) => {
                warn!(iteration, error = %e, "sampling failed");
                state.skips.push(SkipRecord {
                    iteration,
                    forced: None,
                    reason: e.to_string(),
                });
                observer(SearchEvent::Skipped(state.skips.last().expect("just pushed")));
                continue;
            }
        };
        if state.evaluated.contains(&sequence) {
            state.duplicates += 1;
            observer(SearchEvent::Duplicate {
                iteration,
                sequence: &sequence,
            });
            continue;
        }
        let evaluation = evaluator
            .evaluate(&sequence)
            .map_err(|source| SearchError::Evaluator {
                sequence: sequence.clone(),
                source,
            })?;
        let distinct: BTreeSet<ComponentTerm> = sequence.terms().iter().copied().collect();
        for term in distinct {
            *state.component_counts.entry(term).or_insert(0) += 1;
        }
        let record = state.record(iteration, None, sequence, evaluation);
        info!(evaluation = record.evaluation, sequence = %record.sequence, score = record.score, "evaluated");
        observer(SearchEvent::Evaluated(record));
    }
    finish(state)
}

fn finish<E: std::error::Error>(state: SearchState) -> Result<SearchOutcome, SearchError<E>> {
    let best = select_best(&state).map_err(|_| SearchError::NothingEvaluated)?.clone();
    Ok(SearchOutcome { best, state })
}

fn find_unseen(
    grammar: &GrammarSpec,
    config: SampleConfig,
    rng: &mut ChaCha8Rng,
    seen: &BTreeSet<ComponentSequence>,
    term: ComponentTerm,
) -> Result<ComponentSequence, String> {
    for _ in 0..config.resample_budget.max(1) {
        let seq = sample(grammar, rng, config).map_err(|e| e.to_string())?;
        if seq.contains(&term) && !seen.contains(&seq) {
            return Ok(seq);
        }
    }
    Err(format!(
        "no unseen sequence containing {term} within {} samples",
        config.resample_budget
    ))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    use super::*;
    use crate::grammar::{default_grammar, recognize, GrammarSpec};

    fn config(strategy: Strategy, iterations: u32, seed: u64) -> SearchConfig {
        SearchConfig {
            iterations,
            strategy,
            seed,
            sample: SampleConfig::default(),
        }
    }

    fn len_score(seq: &ComponentSequence) -> f64 {
        1.0 / seq.len() as f64
    }

    fn quiet(_: SearchEvent<'_>) {}

    #[test]
    fn forced_counts_advance_together() {
        let g = default_grammar();
        let out = forced_search(&g, &config(Strategy::Forced, 2, 7), &mut ScoreFn(len_score), &mut quiet).unwrap();
        assert_eq!(out.state.history.len(), 18);
        assert!(out.state.component_counts.values().all(|&c| c == 2));
        assert_eq!(out.state.history[8].iteration, 1);
        assert_eq!(out.state.history[9].iteration, 2);
        assert_eq!(out.state.generation_cost, 0.0);
    }

    #[test]
    fn forced_history_is_consistent() {
        let g = default_grammar();
        let out = forced_search(&g, &config(Strategy::Forced, 3, 1), &mut ScoreFn(len_score), &mut quiet).unwrap();
        let s = &out.state;
        assert_eq!(s.history.len(), s.evaluated.len());
        assert_eq!(s.history.len(), s.scores.len());
        for r in &s.history {
            assert!(recognize(&g, &r.sequence).is_accept());
            assert!(r.sequence.contains(&r.forced.unwrap()));
        }
        let covered: BTreeSet<_> = s.history[..9].iter().flat_map(|r| r.sequence.terms().to_vec()).collect();
        assert_eq!(covered.len(), 9);
    }

    #[test]
    fn planted_optimum_found() {
        let g = default_grammar();
        let planted = |s: &ComponentSequence| f64::from(u8::from(s.contains(&ComponentTerm::MajorityVoter)));
        for strategy in [Strategy::Forced, Strategy::Random] {
            let out = search(&g, &config(strategy, 30, 3), &mut ScoreFn(planted), &mut quiet).unwrap();
            assert!(out.best.contains(&ComponentTerm::MajorityVoter), "{strategy}");
        }
    }

    #[test]
    fn random_search_consumes_iterations_on_duplicates() {
        // a grammar with exactly two sentences
        let g = GrammarSpec::parse("<S> ::= StepByStepReasoner[cnt=1] | RoleBasedReasoner[cnt=1]\n").unwrap();
        let mut seen = Vec::new();
        let out = random_search(&g, &config(Strategy::Random, 20, 5), &mut ScoreFn(len_score), &mut |e| {
            if let SearchEvent::Duplicate { iteration, .. } = e {
                seen.push(iteration)
            }
        })
        .unwrap();
        assert_eq!(out.state.history.len(), 2);
        assert_eq!(out.state.duplicates, 18);
        assert_eq!(seen.len(), 18);
    }

    #[test]
    fn forced_skips_when_pool_exhausted() {
        let g = GrammarSpec::parse("<S> ::= StepByStepReasoner[cnt=1] | RoleBasedReasoner[cnt=1]\n").unwrap();
        let mut cfg = config(Strategy::Forced, 3, 0);
        cfg.sample.resample_budget = 50;
        let out = forced_search(&g, &cfg, &mut ScoreFn(len_score), &mut quiet).unwrap();
        assert_eq!(out.state.history.len(), 2);
        assert_eq!(out.state.skips.len(), 4);
        assert!(out.state.component_counts.values().all(|&c| c == 1));
    }

    #[test]
    fn same_seed_same_state() {
        let g = default_grammar();
        for strategy in [Strategy::Forced, Strategy::Random] {
            let a = search(&g, &config(strategy, 4, 11), &mut ScoreFn(len_score), &mut quiet).unwrap();
            let b = search(&g, &config(strategy, 4, 11), &mut ScoreFn(len_score), &mut quiet).unwrap();
            assert_eq!(a.state, b.state);
            assert_eq!(a.best, b.best);
        }
    }

    #[test]
    fn zero_iterations_rejected() {
        let g = default_grammar();
        assert!(matches!(
            forced_search(&g, &config(Strategy::Forced, 0, 0), &mut ScoreFn(len_score), &mut quiet),
            Err(SearchError::NoIterations)
        ));
    }

    fn state_with(scores: &[(&str, f64)]) -> SearchState {
        let mut state = SearchState::new(&[]);
        for (text, score) in scores {
            state.record(1, None, text.parse().unwrap(), Evaluation::free(*score));
        }
        state
    }

    #[test]
    fn select_best_argmax_and_ties() {
        let a = "StepByStepReasoner[cnt=1]";
        let b = "RoleBasedReasoner[cnt=1]";
        assert_eq!(select_best(&state_with(&[(a, 0.8), (b, 0.6)])).unwrap().to_string(), a);
        assert_eq!(select_best(&state_with(&[(b, 0.6), (a, 0.8)])).unwrap().to_string(), a);
        assert_eq!(select_best(&state_with(&[(a, 0.7), (b, 0.7)])).unwrap().to_string(), a);
        assert_eq!(select_best(&state_with(&[(b, 0.3)])).unwrap().to_string(), b);
        assert_eq!(select_best(&SearchState::new(&[])), Err(EmptyState));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn forced_balance_holds_at_every_boundary(seed in any::<u64>(), iterations in 1u32..4) {
            let g = default_grammar();
            let mut boundaries = Vec::new();
            let mut last_iter = 0;
            let mut counts: BTreeMap<ComponentTerm, u64> = BTreeMap::new();
            let out = forced_search(&g, &config(Strategy::Forced, iterations, seed), &mut ScoreFn(len_score), &mut |e| {
                if let SearchEvent::Evaluated(r) = e {
                    if r.iteration != last_iter && last_iter != 0 {
                        boundaries.push(counts.clone());
                    }
                    last_iter = r.iteration;
                    *counts.entry(r.forced.unwrap()).or_insert(0) += 1;
                }
            }).unwrap();
            boundaries.push(counts);
            prop_assert!(out.state.skips.is_empty());
            for (t, snapshot) in boundaries.iter().enumerate() {
                prop_assert_eq!(snapshot.len(), 9);
                prop_assert!(snapshot.values().all(|&c| c == t as u64 + 1));
            }
            let best = out.state.best().unwrap();
            prop_assert!(out.state.history.iter().all(|r| r.score <= best.score));
        }
    }
}
