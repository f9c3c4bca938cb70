//! Grammar data model, validation, the default grammar and its text format.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use super::term::{Arity, ComponentTerm, TermError};

/// Index of a nonterminal inside a [`GrammarSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NonTerminal(pub(crate) usize);

/// Index of a production inside a [`GrammarSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductionId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    NonTerminal(NonTerminal),
    Terminal(ComponentTerm),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub head: NonTerminal,
    pub body: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Terminal {
        line: usize,
        #[source]
        source: TermError,
    },
    #[error("grammar has no productions")]
    Empty,
    #[error("nonterminal <{0}> is used but has no productions")]
    Undefined(String),
    #[error("production for <{0}> has an empty body")]
    EmptyBody(String),
    #[error("nonterminal <{0}> is unreachable from the start symbol")]
    Unreachable(String),
    #[error("nonterminal <{0}> cannot derive a terminal string")]
    Unproductive(String),
    #[error("production <{head}> ::= {body}: {left} output cannot feed {right} input")]
    ArityChain {
        head: String,
        body: String,
        left: String,
        right: String,
    },
    #[error("start symbol <{0}> must take a single input and produce a single output")]
    StartArity(String),
}

/// A context-free grammar over component terminals.
///
/// Built through [`GrammarSpec::new`] or [`GrammarSpec::parse`], both of
/// which validate: no empty bodies, every nonterminal defined, reachable and
/// productive, and every adjacent pair in a body agrees on arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarSpec {
    names: Vec<String>,
    productions: Vec<Production>,
    by_head: Vec<Vec<ProductionId>>,
    terminals: Vec<ComponentTerm>,
}

/// Symbol in an unresolved rule, before nonterminal names get indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawSymbol {
    NonTerminal(String),
    Terminal(ComponentTerm),
}

impl RawSymbol {
    pub fn nt(name: &str) -> Self {
        RawSymbol::NonTerminal(name.to_string())
    }
}

impl From<ComponentTerm> for RawSymbol {
    fn from(term: ComponentTerm) -> Self {
        RawSymbol::Terminal(term)
    }
}

impl GrammarSpec {
    /// Builds a grammar from `(head, body)` rules. The head of the first rule
    /// is the start symbol.
    pub fn new(rules: Vec<(String, Vec<RawSymbol>)>) -> Result<Self, GrammarError> {
        if rules.is_empty() {
            return Err(GrammarError::Empty);
        }
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (head, _) in &rules {
            if !index.contains_key(head) {
                index.insert(head.clone(), names.len());
                names.push(head.clone());
            }
        }
        let mut productions = Vec::with_capacity(rules.len());
        let mut by_head = vec![Vec::new(); names.len()];
        let mut terminals = Vec::new();
        for (head, body) in rules {
            if body.is_empty() {
                return Err(GrammarError::EmptyBody(head));
            }
            let head = NonTerminal(index[&head]);
            let body = body
                .into_iter()
                .map(|symbol| match symbol {
                    RawSymbol::NonTerminal(name) => index
                        .get(&name)
                        .map(|&i| Symbol::NonTerminal(NonTerminal(i)))
                        .ok_or(GrammarError::Undefined(name)),
                    RawSymbol::Terminal(term) => {
                        if !terminals.contains(&term) {
                            terminals.push(term);
                        }
                        Ok(Symbol::Terminal(term))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            by_head[head.0].push(ProductionId(productions.len()));
            productions.push(Production { head, body });
        }
        let grammar = Self {
            names,
            productions,
            by_head,
            terminals,
        };
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn start(&self) -> NonTerminal {
        NonTerminal(0)
    }

    pub fn name(&self, nt: NonTerminal) -> &str {
        &self.names[nt.0]
    }

    pub fn nonterminal(&self, name: &str) -> Option<NonTerminal> {
        self.names.iter().position(|n| n == name).map(NonTerminal)
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = NonTerminal> + '_ {
        (0..self.names.len()).map(NonTerminal)
    }

    pub fn nonterminal_names(&self) -> &[String] {
        &self.names
    }

    /// Terminals in order of first appearance.
    pub fn terminals(&self) -> &[ComponentTerm] {
        &self.terminals
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, id: ProductionId) -> &Production {
        &self.productions[id.0]
    }

    pub fn alternatives(&self, nt: NonTerminal) -> &[ProductionId] {
        &self.by_head[nt.0]
    }

    pub fn render_symbol(&self, symbol: &Symbol) -> String {
        match symbol {
            Symbol::NonTerminal(nt) => format!("<{}>", self.name(*nt)),
            Symbol::Terminal(term) => term.to_string(),
        }
    }

    pub fn render_body(&self, body: &[Symbol]) -> String {
        body.iter()
            .map(|s| self.render_symbol(s))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// `<Head> -> body`, one derivation step.
    pub fn render_production(&self, id: ProductionId) -> String {
        let p = self.production(id);
        format!("<{}> -> {}", self.name(p.head), self.render_body(&p.body))
    }

    fn validate(&self) -> Result<(), GrammarError> {
        // reachability
        let mut reached = vec![false; self.names.len()];
        let mut stack = vec![self.start()];
        reached[0] = true;
        while let Some(nt) = stack.pop() {
            for &pid in self.alternatives(nt) {
                for symbol in &self.production(pid).body {
                    if let Symbol::NonTerminal(next) = symbol {
                        if !reached[next.0] {
                            reached[next.0] = true;
                            stack.push(*next);
                        }
                    }
                }
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(GrammarError::Unreachable(self.names[i].clone()));
        }

        // productivity
        let mut productive = vec![false; self.names.len()];
        loop {
            let mut changed = false;
            for p in &self.productions {
                if productive[p.head.0] {
                    continue;
                }
                let ok = p.body.iter().all(|s| match s {
                    Symbol::Terminal(_) => true,
                    Symbol::NonTerminal(nt) => productive[nt.0],
                });
                if ok {
                    productive[p.head.0] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if let Some(i) = productive.iter().position(|p| !p) {
            return Err(GrammarError::Unproductive(self.names[i].clone()));
        }

        // arity chaining
        let (first_in, last_out) = self.arity_sets();
        let inputs = |s: &Symbol| match s {
            Symbol::Terminal(t) => BTreeSet::from([arity_key(t.signature().input)]),
            Symbol::NonTerminal(nt) => first_in[nt.0].clone(),
        };
        let outputs = |s: &Symbol| match s {
            Symbol::Terminal(t) => BTreeSet::from([arity_key(t.signature().output)]),
            Symbol::NonTerminal(nt) => last_out[nt.0].clone(),
        };
        for p in &self.productions {
            for pair in p.body.windows(2) {
                let left = outputs(&pair[0]);
                let right = inputs(&pair[1]);
                let consistent = left.len() == 1 && left == right;
                if !consistent {
                    return Err(GrammarError::ArityChain {
                        head: self.names[p.head.0].clone(),
                        body: self.render_body(&p.body),
                        left: self.render_symbol(&pair[0]),
                        right: self.render_symbol(&pair[1]),
                    });
                }
            }
        }
        let one = BTreeSet::from([arity_key(Arity::One)]);
        if first_in[0] != one || last_out[0] != one {
            return Err(GrammarError::StartArity(self.names[0].clone()));
        }
        Ok(())
    }

    /// For each nonterminal, the input arities its strings can begin with and
    /// the output arities they can end with.
    fn arity_sets(&self) -> (Vec<BTreeSet<u8>>, Vec<BTreeSet<u8>>) {
        let n = self.names.len();
        let mut first_in = vec![BTreeSet::new(); n];
        let mut last_out = vec![BTreeSet::new(); n];
        loop {
            let mut changed = false;
            for p in &self.productions {
                let head = p.head.0;
                let first = match &p.body[0] {
                    Symbol::Terminal(t) => BTreeSet::from([arity_key(t.signature().input)]),
                    Symbol::NonTerminal(nt) => first_in[nt.0].clone(),
                };
                let last = match &p.body[p.body.len() - 1] {
                    Symbol::Terminal(t) => BTreeSet::from([arity_key(t.signature().output)]),
                    Symbol::NonTerminal(nt) => last_out[nt.0].clone(),
                };
                for a in first {
                    changed |= first_in[head].insert(a);
                }
                for a in last {
                    changed |= last_out[head].insert(a);
                }
            }
            if !changed {
                return (first_in, last_out);
            }
        }
    }

    /// Parses the text format produced by [`GrammarSpec::to_text`].
    ///
    /// ```text
    /// # comment
    /// <System>  ::= <StartSI>
    /// <StartSI> ::= <StartSISO>
    ///             | <StartSISO> <SI>
    /// ```
    ///
    /// Nonterminals are written in angle brackets, everything else is a
    /// component token such as `DebateIteration[rnds=2]`. The first rule's
    /// head is the start symbol.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut rules: Vec<(String, Vec<RawSymbol>)> = Vec::new();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let alternatives = if let Some(rest) = content.strip_prefix('|') {
                let head = current.clone().ok_or_else(|| GrammarError::Syntax {
                    line,
                    message: "alternative without a preceding rule".into(),
                })?;
                vec![(head, rest)]
            } else {
                let (lhs, rhs) = content
                    .split_once("::=")
                    .or_else(|| content.split_once("->"))
                    .ok_or_else(|| GrammarError::Syntax {
                        line,
                        message: "expected `<Head> ::= body`".into(),
                    })?;
                let head = parse_nonterminal(lhs.trim()).ok_or_else(|| GrammarError::Syntax {
                    line,
                    message: format!("rule head `{}` is not a <nonterminal>", lhs.trim()),
                })?;
                current = Some(head.clone());
                vec![(head, rhs)]
            };
            for (head, rhs) in alternatives {
                for alt in rhs.split('|') {
                    let mut body = Vec::new();
                    for token in alt.split_whitespace() {
                        match parse_nonterminal(token) {
                            Some(name) => body.push(RawSymbol::NonTerminal(name)),
                            None => body.push(RawSymbol::Terminal(
                                token
                                    .parse()
                                    .map_err(|source| GrammarError::Terminal { line, source })?,
                            )),
                        }
                    }
                    if body.is_empty() {
                        return Err(GrammarError::Syntax {
                            line,
                            message: "empty alternative".into(),
                        });
                    }
                    rules.push((head.clone(), body));
                }
            }
        }
        Self::new(rules)
    }

    pub fn to_text(&self) -> String {
        let width = self.names.iter().map(|n| n.len() + 2).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "# nonterminals: {}", self.names.join(" "));
        let terminals: Vec<String> = self.terminals.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(out, "# terminals: {}", terminals.join(" "));
        for nt in self.nonterminals() {
            out.push('\n');
            for (i, &pid) in self.alternatives(nt).iter().enumerate() {
                let body = self.render_body(&self.production(pid).body);
                if i == 0 {
                    let head = format!("<{}>", self.name(nt));
                    let _ = writeln!(out, "{head:<width$} ::= {body}");
                } else {
                    let _ = writeln!(out, "{:<width$}   | {body}", "");
                }
            }
        }
        out
    }
}

impl fmt::Display for GrammarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn arity_key(arity: Arity) -> u8 {
    match arity {
        Arity::One => 1,
        Arity::Many => 2,
    }
}

fn parse_nonterminal(token: &str) -> Option<String> {
    let name = token.strip_prefix('<')?.strip_suffix('>')?.trim();
    (!name.is_empty()).then(|| name.to_string())
}

/// The nine-terminal grammar over SISO/SIMO/MISO/MIMO building blocks.
pub fn default_grammar() -> GrammarSpec {
    use RawSymbol as S;
    let nt = RawSymbol::nt;
    let rule = |head: &str, body: Vec<RawSymbol>| (head.to_string(), body);
    let rules = vec![
        rule("System", vec![nt("StartSI")]),
        rule("StartSI", vec![nt("StartSISO")]),
        rule("StartSI", vec![nt("StartSISO"), nt("SI")]),
        rule("StartSI", vec![nt("SIMO"), nt("MI")]),
        rule("SI", vec![nt("SISO")]),
        rule("SI", vec![nt("SISO"), nt("SI")]),
        rule("SI", vec![nt("SIMO"), nt("MI")]),
        rule("MI", vec![nt("MISO")]),
        rule("MI", vec![nt("MISO"), nt("SI")]),
        rule("MI", vec![nt("MIMO"), nt("MI")]),
        rule("StartSISO", vec![S::Terminal(ComponentTerm::step_by_step(1))]),
        rule("StartSISO", vec![S::Terminal(ComponentTerm::role_based(1))]),
        rule("SISO", vec![S::Terminal(ComponentTerm::step_by_step(1))]),
        rule("SISO", vec![S::Terminal(ComponentTerm::role_based(1))]),
        rule("SISO", vec![S::Terminal(ComponentTerm::self_critic(5))]),
        rule("SIMO", vec![S::Terminal(ComponentTerm::step_by_step(5))]),
        rule("SIMO", vec![S::Terminal(ComponentTerm::role_based(5))]),
        rule("MISO", vec![S::Terminal(ComponentTerm::MajorityVoter)]),
        rule("MISO", vec![S::Terminal(ComponentTerm::ConsensusBuilder)]),
        rule("MIMO", vec![S::Terminal(ComponentTerm::debate(2))]),
        rule("MIMO", vec![S::Terminal(ComponentTerm::multi_self_critic(5))]),
    ];
    GrammarSpec::new(rules).expect("default grammar is valid")
}
