use std::collections::BTreeSet;

use super::sequence::ComponentSequence;
use super::spec::{GrammarSpec, Symbol};
use super::term::ComponentTerm;

type Language = BTreeSet<Vec<ComponentTerm>>;

/// All distinct derivable sequences of at most `max_len` terms, in
/// lexicographic order (term kind first, then parameter).
///
/// Computed as a least fixpoint of length-bounded languages per nonterminal.
/// No production has an empty body, so every language is finite.
pub fn enumerate(grammar: &GrammarSpec, max_len: usize) -> Vec<ComponentSequence> {
    let n = grammar.nonterminal_names().len();
    let mut languages: Vec<Language> = vec![Language::new(); n];
    loop {
        let mut changed = false;
        for production in grammar.productions() {
            let mut partial: Language = BTreeSet::from([Vec::new()]);
            for symbol in &production.body {
                let options: Vec<Vec<ComponentTerm>> = match symbol {
                    Symbol::Terminal(t) => vec![vec![*t]],
                    Symbol::NonTerminal(nt) => languages[nt.0].iter().cloned().collect(),
                };
                let mut next = Language::new();
                for prefix in &partial {
                    for option in &options {
                        if prefix.len() + option.len() <= max_len {
                            let mut joined = prefix.clone();
                            joined.extend_from_slice(option);
                            next.insert(joined);
                        }
                    }
                }
                partial = next;
                if partial.is_empty() {
                    break;
                }
            }
            for string in partial {
                changed |= languages[production.head.0].insert(string);
            }
        }
        if !changed {
            break;
        }
    }
    std::mem::take(&mut languages[grammar.start().0])
        .into_iter()
        .filter_map(ComponentSequence::new)
        .collect()
}
