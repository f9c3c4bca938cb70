//! Grammar terminals: the executable components of a multi-agent system and
//! their input/output arity.

use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Whether a component consumes/produces a single answer or several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arity {
    One,
    Many,
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arity::One => "single",
            Arity::Many => "multiple",
        })
    }
}

/// Input/output arity of a component.
///
/// The four combinations are the SISO, SIMO, MISO and MIMO classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AritySignature {
    pub input: Arity,
    pub output: Arity,
}

impl AritySignature {
    pub const SISO: Self = Self::new(Arity::One, Arity::One);
    pub const SIMO: Self = Self::new(Arity::One, Arity::Many);
    pub const MISO: Self = Self::new(Arity::Many, Arity::One);
    pub const MIMO: Self = Self::new(Arity::Many, Arity::Many);

    pub const fn new(input: Arity, output: Arity) -> Self {
        Self { input, output }
    }

    pub fn class_name(&self) -> &'static str {
        match (self.input, self.output) {
            (Arity::One, Arity::One) => "SISO",
            (Arity::One, Arity::Many) => "SIMO",
            (Arity::Many, Arity::One) => "MISO",
            (Arity::Many, Arity::Many) => "MIMO",
        }
    }
}

/// The component families with runtime semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    StepByStepReasoner,
    RoleBasedReasoner,
    SelfCriticIteration,
    DebateIteration,
    MultiSelfCriticIteration,
    MajorityVoter,
    ConsensusBuilder,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 7] = [
        ComponentKind::StepByStepReasoner,
        ComponentKind::RoleBasedReasoner,
        ComponentKind::SelfCriticIteration,
        ComponentKind::DebateIteration,
        ComponentKind::MultiSelfCriticIteration,
        ComponentKind::MajorityVoter,
        ComponentKind::ConsensusBuilder,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ComponentKind::StepByStepReasoner => "StepByStepReasoner",
            ComponentKind::RoleBasedReasoner => "RoleBasedReasoner",
            ComponentKind::SelfCriticIteration => "SelfCriticIteration",
            ComponentKind::DebateIteration => "DebateIteration",
            ComponentKind::MultiSelfCriticIteration => "MultiSelfCriticIteration",
            ComponentKind::MajorityVoter => "MajorityVoter",
            ComponentKind::ConsensusBuilder => "ConsensusBuilder",
        }
    }

    /// Accepts the full name and the condensed names used in tables
    /// (`StepByStep`, `SelfCritic`, `Consensus`, ...).
    pub fn from_name(name: &str) -> Option<Self> {
        let kind = match name {
            "StepByStepReasoner" | "StepByStep" => ComponentKind::StepByStepReasoner,
            "RoleBasedReasoner" | "RoleBased" => ComponentKind::RoleBasedReasoner,
            "SelfCriticIteration" | "SelfCritic" => ComponentKind::SelfCriticIteration,
            "DebateIteration" | "Debate" => ComponentKind::DebateIteration,
            "MultiSelfCriticIteration" | "MultiSelfCritic" => {
                ComponentKind::MultiSelfCriticIteration
            }
            "MajorityVoter" | "Majority" => ComponentKind::MajorityVoter,
            "ConsensusBuilder" | "Consensus" => ComponentKind::ConsensusBuilder,
            _ => return None,
        };
        Some(kind)
    }

    pub fn is_reasoner(&self) -> bool {
        matches!(self, ComponentKind::StepByStepReasoner | ComponentKind::RoleBasedReasoner)
    }

    pub fn is_iterative(&self) -> bool {
        matches!(
            self,
            ComponentKind::SelfCriticIteration
                | ComponentKind::DebateIteration
                | ComponentKind::MultiSelfCriticIteration
        )
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One grammar terminal: a component kind together with its fixed parameter.
///
/// Reasoners carry a `count` (parallel answers), iterative components carry
/// `rounds`, aggregators carry nothing. Two terms that differ only in their
/// parameter are distinct terminals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ComponentTerm {
    StepByStepReasoner { count: NonZeroU32 },
    RoleBasedReasoner { count: NonZeroU32 },
    SelfCriticIteration { rounds: NonZeroU32 },
    DebateIteration { rounds: NonZeroU32 },
    MultiSelfCriticIteration { rounds: NonZeroU32 },
    MajorityVoter,
    ConsensusBuilder,
}

fn nz(value: u32) -> NonZeroU32 {
    NonZeroU32::new(value).expect("component parameter must be positive")
}

impl ComponentTerm {
    /// # Panics
    /// If `count` is zero. The same holds for the other parameterized
    /// constructors below.
    pub fn step_by_step(count: u32) -> Self {
        ComponentTerm::StepByStepReasoner { count: nz(count) }
    }

    pub fn role_based(count: u32) -> Self {
        ComponentTerm::RoleBasedReasoner { count: nz(count) }
    }

    pub fn self_critic(rounds: u32) -> Self {
        ComponentTerm::SelfCriticIteration { rounds: nz(rounds) }
    }

    pub fn debate(rounds: u32) -> Self {
        ComponentTerm::DebateIteration { rounds: nz(rounds) }
    }

    pub fn multi_self_critic(rounds: u32) -> Self {
        ComponentTerm::MultiSelfCriticIteration { rounds: nz(rounds) }
    }

    /// Builds a term from its kind and the optional parameters, checking that
    /// exactly the parameter the kind needs is supplied.
    pub fn from_parts(
        kind: ComponentKind,
        count: Option<u32>,
        rounds: Option<u32>,
    ) -> Result<Self, TermError> {
        let positive = |v: u32| NonZeroU32::new(v).ok_or(TermError::ZeroParameter(kind));
        match (kind.is_reasoner(), kind.is_iterative(), count, rounds) {
            (true, _, Some(c), None) => {
                let count = positive(c)?;
                Ok(match kind {
                    ComponentKind::StepByStepReasoner => ComponentTerm::StepByStepReasoner { count },
                    _ => ComponentTerm::RoleBasedReasoner { count },
                })
            }
            (_, true, None, Some(r)) => {
                let rounds = positive(r)?;
                Ok(match kind {
                    ComponentKind::SelfCriticIteration => ComponentTerm::SelfCriticIteration { rounds },
                    ComponentKind::DebateIteration => ComponentTerm::DebateIteration { rounds },
                    _ => ComponentTerm::MultiSelfCriticIteration { rounds },
                })
            }
            (false, false, None, None) => Ok(match kind {
                ComponentKind::MajorityVoter => ComponentTerm::MajorityVoter,
                _ => ComponentTerm::ConsensusBuilder,
            }),
            _ => Err(TermError::ParameterMismatch(kind)),
        }
    }

    pub fn kind(&self) -> ComponentKind {
        match self {
            ComponentTerm::StepByStepReasoner { .. } => ComponentKind::StepByStepReasoner,
            ComponentTerm::RoleBasedReasoner { .. } => ComponentKind::RoleBasedReasoner,
            ComponentTerm::SelfCriticIteration { .. } => ComponentKind::SelfCriticIteration,
            ComponentTerm::DebateIteration { .. } => ComponentKind::DebateIteration,
            ComponentTerm::MultiSelfCriticIteration { .. } => ComponentKind::MultiSelfCriticIteration,
            ComponentTerm::MajorityVoter => ComponentKind::MajorityVoter,
            ComponentTerm::ConsensusBuilder => ComponentKind::ConsensusBuilder,
        }
    }

    pub fn count(&self) -> Option<u32> {
        match self {
            ComponentTerm::StepByStepReasoner { count } | ComponentTerm::RoleBasedReasoner { count } => {
                Some(count.get())
            }
            _ => None,
        }
    }

    pub fn rounds(&self) -> Option<u32> {
        match self {
            ComponentTerm::SelfCriticIteration { rounds }
            | ComponentTerm::DebateIteration { rounds }
            | ComponentTerm::MultiSelfCriticIteration { rounds } => Some(rounds.get()),
            _ => None,
        }
    }

    pub fn signature(&self) -> AritySignature {
        match self {
            ComponentTerm::StepByStepReasoner { count } | ComponentTerm::RoleBasedReasoner { count } => {
                if count.get() == 1 {
                    AritySignature::SISO
                } else {
                    AritySignature::SIMO
                }
            }
            ComponentTerm::SelfCriticIteration { .. } => AritySignature::SISO,
            ComponentTerm::MajorityVoter | ComponentTerm::ConsensusBuilder => AritySignature::MISO,
            ComponentTerm::DebateIteration { .. } | ComponentTerm::MultiSelfCriticIteration { .. } => {
                AritySignature::MIMO
            }
        }
    }
}

impl fmt::Display for ComponentTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind().name())?;
        if let Some(count) = self.count() {
            write!(f, "[cnt={count}]")?;
        }
        if let Some(rounds) = self.rounds() {
            write!(f, "[rnds={rounds}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("unknown component name `{0}`")]
    UnknownName(String),
    #[error("malformed component token `{0}`")]
    Malformed(String),
    #[error("{kind} takes {expected}", kind = .0, expected = expected_param(*.0))]
    ParameterMismatch(ComponentKind),
    #[error("{0} parameter must be positive")]
    ZeroParameter(ComponentKind),
}

fn expected_param(kind: ComponentKind) -> &'static str {
    if kind.is_reasoner() {
        "exactly one `cnt` parameter"
    } else if kind.is_iterative() {
        "exactly one `rnds` parameter"
    } else {
        "no parameters"
    }
}

impl FromStr for ComponentTerm {
    type Err = TermError;

    /// Parses `Name`, `Name[cnt=5]`, `Name[rnds=2]`, or the condensed
    /// `Name[5]` / `Name(5)` forms.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, param) = match s.find(['[', '(']) {
            None => (s, None),
            Some(open) => {
                let close = if s.as_bytes()[open] == b'[' { ']' } else { ')' };
                if !s.ends_with(close) {
                    return Err(TermError::Malformed(s.to_string()));
                }
                (&s[..open], Some(s[open + 1..s.len() - 1].trim()))
            }
        };
        let kind = ComponentKind::from_name(name.trim())
            .ok_or_else(|| TermError::UnknownName(name.trim().to_string()))?;
        let Some(param) = param else {
            return ComponentTerm::from_parts(kind, None, None);
        };
        let (key, value) = match param.split_once('=') {
            Some((k, v)) => (Some(k.trim()), v.trim()),
            None => (None, param),
        };
        let value: u32 = value.parse().map_err(|_| TermError::Malformed(s.to_string()))?;
        match key {
            Some("cnt" | "count") => ComponentTerm::from_parts(kind, Some(value), None),
            Some("rnds" | "rounds") => ComponentTerm::from_parts(kind, None, Some(value)),
            Some(_) => Err(TermError::Malformed(s.to_string())),
            None if kind.is_reasoner() => ComponentTerm::from_parts(kind, Some(value), None),
            None => ComponentTerm::from_parts(kind, None, Some(value)),
        }
    }
}

impl Serialize for ComponentTerm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ComponentTerm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
