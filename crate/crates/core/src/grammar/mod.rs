//! The component grammar: terminals, sequences, derivations, sampling,
//! recognition and enumeration.

mod enumerate;
mod recognize;
mod sample;
mod sequence;
mod spec;
mod term;

pub use enumerate::enumerate;
pub use recognize::{recognize, Derivation, Recognition, Rejection, ReplayError};
pub use sample::{
    sample, sample_seeded, SampleConfig, SampleError, DEFAULT_MAX_DEPTH, DEFAULT_RESAMPLE_BUDGET,
};
pub use sequence::{ComponentSequence, SequenceParseError};
pub use spec::{
    default_grammar, GrammarError, GrammarSpec, NonTerminal, Production, ProductionId, RawSymbol,
    Symbol,
};
pub use term::{Arity, AritySignature, ComponentKind, ComponentTerm, TermError};

/// A hand-designed system expressed as a component sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseMas {
    pub name: &'static str,
    pub sequence: ComponentSequence,
}

/// CoT, CoT-SC, Self-Refine and Multi-Agent Debate, in that order.
pub fn base_mases() -> Vec<BaseMas> {
    let mas = |name, terms: Vec<ComponentTerm>| BaseMas {
        name,
        sequence: ComponentSequence::new(terms).expect("non-empty"),
    };
    vec![
        mas("CoT", vec![ComponentTerm::step_by_step(1)]),
        mas(
            "CoT-SC",
            vec![ComponentTerm::step_by_step(5), ComponentTerm::MajorityVoter],
        ),
        mas(
            "Self-Refine",
            vec![ComponentTerm::step_by_step(1), ComponentTerm::self_critic(5)],
        ),
        mas(
            "MA-Debate",
            vec![
                ComponentTerm::role_based(5),
                ComponentTerm::debate(2),
                ComponentTerm::ConsensusBuilder,
            ],
        ),
    ]
}

/// Looks up a base system by name, case-insensitively.
pub fn base_mas(name: &str) -> Option<ComponentSequence> {
    base_mases()
        .into_iter()
        .find(|m| m.name.eq_ignore_ascii_case(name))
        .map(|m| m.sequence)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_systems_are_recognized() {
        let g = default_grammar();
        for mas in base_mases() {
            assert!(recognize(&g, &mas.sequence).is_accept(), "{}", mas.name);
        }
    }

    #[test]
    fn base_system_contents() {
        assert_eq!(base_mas("cot").unwrap().to_string(), "StepByStepReasoner[cnt=1]");
        assert_eq!(
            base_mas("Self-Refine").unwrap().to_string(),
            "StepByStepReasoner[cnt=1] => SelfCriticIteration[rnds=5]"
        );
        assert_eq!(
            base_mas("MA-Debate").unwrap().to_string(),
            "RoleBasedReasoner[cnt=5] => DebateIteration[rnds=2] => ConsensusBuilder"
        );
        assert!(base_mas("ToT").is_none());
    }
}
