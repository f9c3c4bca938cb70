use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::term::{ComponentTerm, TermError};

/// An ordered, non-empty list of component terms: the searchable genotype of
/// a multi-agent system.
///
/// Construction only guarantees non-emptiness. Whether the sequence is a
/// legal system is decided by [`recognize`](super::recognize).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentSequence(Vec<ComponentTerm>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceParseError {
    #[error("component sequence is empty")]
    Empty,
    #[error("token {position}: {source}")]
    Term {
        position: usize,
        #[source]
        source: TermError,
    },
}

impl ComponentSequence {
    pub fn new(terms: Vec<ComponentTerm>) -> Option<Self> {
        (!terms.is_empty()).then_some(Self(terms))
    }

    pub fn terms(&self) -> &[ComponentTerm] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, term: &ComponentTerm) -> bool {
        self.0.contains(term)
    }

    pub fn into_terms(self) -> Vec<ComponentTerm> {
        self.0
    }
}

impl fmt::Display for ComponentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" => ")?;
            }
            write!(f, "{term}")?;
        }
        Ok(())
    }
}

impl FromStr for ComponentSequence {
    type Err = SequenceParseError;

    /// Tokens are separated by `=>`; `->` and `→` are accepted too.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.replace('→', "=>").replace("->", "=>");
        let terms = normalized
            .split("=>")
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(position, token)| {
                token.parse().map_err(|source| SequenceParseError::Term { position, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(terms).ok_or(SequenceParseError::Empty)
    }
}

impl From<ComponentTerm> for ComponentSequence {
    fn from(term: ComponentTerm) -> Self {
        Self(vec![term])
    }
}

impl Serialize for ComponentSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ComponentSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_with_arrow_separators() {
        let seq = ComponentSequence::new(vec![
            ComponentTerm::role_based(5),
            ComponentTerm::debate(2),
            ComponentTerm::ConsensusBuilder,
        ])
        .unwrap();
        assert_eq!(
            seq.to_string(),
            "RoleBasedReasoner[cnt=5] => DebateIteration[rnds=2] => ConsensusBuilder"
        );
        assert_eq!(seq.to_string().parse::<ComponentSequence>().unwrap(), seq);
    }

    #[test]
    fn accepts_alternative_separators() {
        let a: ComponentSequence = "StepByStep[5] -> MajorityVoter".parse().unwrap();
        let b: ComponentSequence = "StepByStep(5) → MajorityVoter".parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!("".parse::<ComponentSequence>(), Err(SequenceParseError::Empty));
        assert_eq!(" => ".parse::<ComponentSequence>(), Err(SequenceParseError::Empty));
        assert!(ComponentSequence::new(vec![]).is_none());
    }

    #[test]
    fn bad_token_reports_its_position() {
        let err = "StepByStep[5] => Oracle".parse::<ComponentSequence>().unwrap_err();
        assert!(matches!(err, SequenceParseError::Term { position: 1, .. }));
    }
}
