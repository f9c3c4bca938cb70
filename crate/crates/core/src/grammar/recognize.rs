//! Membership test with witness derivations.
//!
//! Recognition works over spans of the input: `derive(A, i, j)` asks whether
//! nonterminal `A` derives exactly `terms[i..j]`. Every symbol covers at
//! least one term, so spans shrink strictly except through unit
//! productions; unit cycles are cut by an in-progress marker. On rejection
//! the longest viable prefix locates the first offending position.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::sequence::ComponentSequence;
use super::spec::{GrammarSpec, NonTerminal, ProductionId, Symbol};
use super::term::{Arity, ComponentTerm};

/// Leftmost derivation: production applications from the start symbol, in
/// the order they rewrite the leftmost nonterminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    steps: Vec<ProductionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: production head does not match the leftmost nonterminal")]
    HeadMismatch { step: usize },
    #[error("step {step}: no nonterminal left to rewrite")]
    NothingToRewrite { step: usize },
    #[error("derivation ends with unexpanded nonterminals")]
    Unfinished,
}

impl Derivation {
    pub fn steps(&self) -> &[ProductionId] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// One `<Head> -> body` line per step.
    pub fn lines(&self, grammar: &GrammarSpec) -> Vec<String> {
        self.steps.iter().map(|&p| grammar.render_production(p)).collect()
    }

    /// Re-applies the steps from the start symbol.
    pub fn replay(&self, grammar: &GrammarSpec) -> Result<ComponentSequence, ReplayError> {
        let mut form = vec![Symbol::NonTerminal(grammar.start())];
        for (step, &pid) in self.steps.iter().enumerate() {
            let at = form
                .iter()
                .position(|s| matches!(s, Symbol::NonTerminal(_)))
                .ok_or(ReplayError::NothingToRewrite { step })?;
            let production = grammar.production(pid);
            if form[at] != Symbol::NonTerminal(production.head) {
                return Err(ReplayError::HeadMismatch { step });
            }
            form.splice(at..=at, production.body.iter().copied());
        }
        let terms = form
            .into_iter()
            .map(|s| match s {
                Symbol::Terminal(t) => Ok(t),
                Symbol::NonTerminal(_) => Err(ReplayError::Unfinished),
            })
            .collect::<Result<Vec<_>, _>>()?;
        ComponentSequence::new(terms).ok_or(ReplayError::Unfinished)
    }
}

/// Why a sequence is not derivable. Every variant names the first position
/// at which no derivation can continue.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("position {position}: {term} is not a terminal of this grammar")]
    UnknownTerminal { position: usize, term: ComponentTerm },
    #[error("position 0: {term} takes multiple inputs and cannot start a system")]
    ManyInputStart { term: ComponentTerm },
    #[error("position 0: {term} cannot be the first component")]
    NotStartable { term: ComponentTerm },
    #[error(
        "position {position}: {term} expects {expected} input but {previous} produces {found} output"
    )]
    ChainBreak {
        position: usize,
        previous: ComponentTerm,
        term: ComponentTerm,
        expected: Arity,
        found: Arity,
    },
    #[error("position {position}: {term} cannot follow the preceding components")]
    NotDerivable { position: usize, term: ComponentTerm },
    #[error("position {position}: final component {term} produces multiple outputs; a system must end with a single answer")]
    ManyOutputEnd { position: usize, term: ComponentTerm },
    #[error("position {position}: sequence ends before its derivation is complete")]
    Incomplete { position: usize, term: ComponentTerm },
}

impl Rejection {
    pub fn position(&self) -> usize {
        match self {
            Rejection::ManyInputStart { .. } | Rejection::NotStartable { .. } => 0,
            Rejection::UnknownTerminal { position, .. }
            | Rejection::ChainBreak { position, .. }
            | Rejection::NotDerivable { position, .. }
            | Rejection::ManyOutputEnd { position, .. }
            | Rejection::Incomplete { position, .. } => *position,
        }
    }
}

/// Outcome of [`recognize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recognition {
    Accept(Derivation),
    Reject(Rejection),
}

impl Recognition {
    pub fn is_accept(&self) -> bool {
        matches!(self, Recognition::Accept(_))
    }

    pub fn into_result(self) -> Result<Derivation, Rejection> {
        match self {
            Recognition::Accept(d) => Ok(d),
            Recognition::Reject(r) => Err(r),
        }
    }
}

impl fmt::Display for Recognition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recognition::Accept(d) => write!(f, "accepted ({} derivation steps)", d.len()),
            Recognition::Reject(r) => write!(f, "rejected: {r}"),
        }
    }
}

/// Decides whether `seq` is derivable from the grammar's start symbol.
pub fn recognize(grammar: &GrammarSpec, seq: &ComponentSequence) -> Recognition {
    let terms = seq.terms();
    let mut parser = SpanParser::new(grammar, terms);
    if let Some(steps) = parser.derive(grammar.start(), 0, terms.len()) {
        return Recognition::Accept(Derivation { steps });
    }
    Recognition::Reject(diagnose(grammar, terms))
}

fn diagnose(grammar: &GrammarSpec, terms: &[ComponentTerm]) -> Rejection {
    if let Some((position, term)) = terms
        .iter()
        .enumerate()
        .find(|(_, t)| !grammar.terminals().contains(t))
    {
        return Rejection::UnknownTerminal { position, term: *term };
    }
    // longest prefix that some complete system starts with
    let mut viable = 0;
    for k in 1..=terms.len() {
        let mut parser = SpanParser::new(grammar, &terms[..k]);
        if parser.prefix(grammar.start(), 0) {
            viable = k;
        } else {
            break;
        }
    }
    if viable == terms.len() {
        let position = terms.len() - 1;
        let term = terms[position];
        return if term.signature().output == Arity::Many {
            Rejection::ManyOutputEnd { position, term }
        } else {
            Rejection::Incomplete { position, term }
        };
    }
    let position = viable;
    let term = terms[position];
    if position == 0 {
        return if term.signature().input == Arity::Many {
            Rejection::ManyInputStart { term }
        } else {
            Rejection::NotStartable { term }
        };
    }
    let previous = terms[position - 1];
    let found = previous.signature().output;
    let expected = term.signature().input;
    if found != expected {
        Rejection::ChainBreak {
            position,
            previous,
            term,
            expected,
            found,
        }
    } else {
        Rejection::NotDerivable { position, term }
    }
}

type Steps = Vec<ProductionId>;

struct SpanParser<'a> {
    grammar: &'a GrammarSpec,
    terms: &'a [ComponentTerm],
    spans: HashMap<(NonTerminal, usize, usize), Option<Steps>>,
    prefixes: HashMap<(NonTerminal, usize), bool>,
}

impl<'a> SpanParser<'a> {
    fn new(grammar: &'a GrammarSpec, terms: &'a [ComponentTerm]) -> Self {
        Self {
            grammar,
            terms,
            spans: HashMap::new(),
            prefixes: HashMap::new(),
        }
    }

    /// Leftmost derivation of `terms[i..j]` from `nt`, first alternative wins.
    fn derive(&mut self, nt: NonTerminal, i: usize, j: usize) -> Option<Steps> {
        if let Some(cached) = self.spans.get(&(nt, i, j)) {
            return cached.clone();
        }
        self.spans.insert((nt, i, j), None);
        let mut found = None;
        for &pid in self.grammar.alternatives(nt) {
            let body = self.grammar.production(pid).body.clone();
            if let Some(rest) = self.match_body(&body, i, j) {
                let mut steps = Vec::with_capacity(rest.len() + 1);
                steps.push(pid);
                steps.extend(rest);
                found = Some(steps);
                break;
            }
        }
        self.spans.insert((nt, i, j), found.clone());
        found
    }

    fn match_body(&mut self, body: &[Symbol], i: usize, j: usize) -> Option<Steps> {
        let Some((first, rest)) = body.split_first() else {
            return (i == j).then(Vec::new);
        };
        // each remaining symbol needs at least one term
        if j < i + body.len() {
            return None;
        }
        match first {
            Symbol::Terminal(t) => {
                if self.terms[i] == *t {
                    self.match_body(rest, i + 1, j)
                } else {
                    None
                }
            }
            Symbol::NonTerminal(nt) => {
                let last_end = j - rest.len();
                for end in i + 1..=last_end {
                    if rest.is_empty() && end != j {
                        continue;
                    }
                    if let Some(mut head) = self.derive(*nt, i, end) {
                        if let Some(tail) = self.match_body(rest, end, j) {
                            head.extend(tail);
                            return Some(head);
                        }
                    }
                }
                None
            }
        }
    }

    /// Whether `nt` derives some string that begins with `terms[i..]`.
    fn prefix(&mut self, nt: NonTerminal, i: usize) -> bool {
        if i == self.terms.len() {
            return true;
        }
        if let Some(&cached) = self.prefixes.get(&(nt, i)) {
            return cached;
        }
        self.prefixes.insert((nt, i), false);
        let mut result = false;
        for &pid in self.grammar.alternatives(nt) {
            let body = self.grammar.production(pid).body.clone();
            if self.prefix_body(&body, i) {
                result = true;
                break;
            }
        }
        self.prefixes.insert((nt, i), result);
        result
    }

    fn prefix_body(&mut self, body: &[Symbol], i: usize) -> bool {
        let n = self.terms.len();
        if i == n {
            return true;
        }
        let Some((first, rest)) = body.split_first() else {
            return false;
        };
        match first {
            Symbol::Terminal(t) => self.terms[i] == *t && self.prefix_body(rest, i + 1),
            Symbol::NonTerminal(nt) => {
                if self.prefix(*nt, i) {
                    return true;
                }
                (i + 1..n).any(|end| self.derive(*nt, i, end).is_some() && self.prefix_body(rest, end))
            }
        }
    }
}
