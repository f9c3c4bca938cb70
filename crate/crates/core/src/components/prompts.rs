//! Instruction templates for every component, loadable from a TOML catalog.
//!
//! The catalog is keyed by component name, then slot:
//!
//! ```toml
//! [StepByStepReasoner]
//! initial = "Please think step by step ..."
//! followup = "Based on the previous solution above ..."
//!
//! [MajorityVoter]
//! header = "Given these {n} solutions to the same problem:\n\n"
//! ```
//!
//! Missing sections or slots keep their built-in text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::ComponentKind;

pub const BOXED_INITIAL: &str =
    "Please think step by step and then solve the task. Put your final answer in \\boxed{}.";
pub const STEP_BY_STEP_FOLLOWUP: &str = "Based on the previous solution above, please think step by step and provide your own solution. Put your final answer in \\boxed{}.";
pub const ROLE_BASED_FOLLOWUP: &str = "Based on the previous solution above, please think step by step from your role perspective and provide your own solution. Put your final answer in \\boxed{}.";
pub const CRITIC: &str = "Please review the answer above and provide detailed feedback on any errors or improvements needed. At the end of your feedback, write either [CORRECT] or [INCORRECT].";
pub const REFLECT: &str = "Given previous attempts and feedback, carefully consider where you could go wrong. Using insights from previous attempts, try to solve the task better. Put your final answer in \\boxed{}.";
pub const DEBATE: &str = "Given solutions to the problem from all agents (including yourself), consider all perspectives and provide an updated solution and answer. Put your final answer in \\boxed{}.";
pub const VOTE_HEADER: &str = "Given these {n} solutions to the same problem:\n\n";
pub const VOTE_ITEM: &str = "\nSolution {i}:\n{content}\n";
pub const VOTE_FOOTER: &str = "\nAnalyze these solutions and identify which answer appears most frequently.\nCopy that ENTIRE solution verbatim, including all reasoning steps.\nAfter copying the solution, ensure your final answer is in \\boxed{}.";
pub const CONSENSUS: &str = "Given all the above solutions, analyze them carefully and provide a final solution and answer. Put your final answer in \\boxed{}.";
pub const ROLES: [&str; 5] = [
    "Math Professor",
    "Grade School Teacher",
    "Math Enthusiast",
    "Research Scientist",
    "Teaching Assistant",
];

/// Critic verdict sentinel that ends a refinement loop early.
pub const CORRECT_TOKEN: &str = "[CORRECT]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonerPrompts {
    pub initial: String,
    pub followup: String,
}

impl Default for ReasonerPrompts {
    fn default() -> Self {
        Self {
            initial: BOXED_INITIAL.into(),
            followup: STEP_BY_STEP_FOLLOWUP.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoleBasedPrompts {
    pub initial: String,
    pub followup: String,
    /// Assigned to agents cyclically.
    pub roles: Vec<String>,
}

impl Default for RoleBasedPrompts {
    fn default() -> Self {
        Self {
            initial: BOXED_INITIAL.into(),
            followup: ROLE_BASED_FOLLOWUP.into(),
            roles: ROLES.iter().map(|r| r.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticPrompts {
    pub critic: String,
    pub reflect: String,
}

impl Default for CriticPrompts {
    fn default() -> Self {
        Self {
            critic: CRITIC.into(),
            reflect: REFLECT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebatePrompts {
    pub instruction: String,
}

impl Default for DebatePrompts {
    fn default() -> Self {
        Self {
            instruction: DEBATE.into(),
        }
    }
}

/// `{n}` is the number of solutions, `{i}` the 1-based index and `{content}`
/// the solution text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoterPrompts {
    pub header: String,
    pub item: String,
    pub footer: String,
}

impl Default for VoterPrompts {
    fn default() -> Self {
        Self {
            header: VOTE_HEADER.into(),
            item: VOTE_ITEM.into(),
            footer: VOTE_FOOTER.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusPrompts {
    pub instruction: String,
}

impl Default for ConsensusPrompts {
    fn default() -> Self {
        Self {
            instruction: CONSENSUS.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptCatalog {
    #[serde(rename = "StepByStepReasoner")]
    pub step_by_step: ReasonerPrompts,
    #[serde(rename = "RoleBasedReasoner")]
    pub role_based: RoleBasedPrompts,
    /// Shared by the single- and multi-stream refinement components.
    #[serde(rename = "SelfCriticIteration")]
    pub self_critic: CriticPrompts,
    #[serde(rename = "DebateIteration")]
    pub debate: DebatePrompts,
    #[serde(rename = "MajorityVoter")]
    pub majority_voter: VoterPrompts,
    #[serde(rename = "ConsensusBuilder")]
    pub consensus: ConsensusPrompts,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("invalid prompt catalog: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("role-based reasoner needs at least one role")]
    NoRoles,
}

impl PromptCatalog {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let catalog: Self = toml::from_str(text)?;
        if catalog.role_based.roles.is_empty() {
            return Err(CatalogError::NoRoles);
        }
        Ok(catalog)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("catalog serializes")
    }

    /// Looks up one template slot.
    pub fn get(&self, kind: ComponentKind, slot: &str) -> Option<&str> {
        let text = match (kind, slot) {
            (ComponentKind::StepByStepReasoner, "initial") => &self.step_by_step.initial,
            (ComponentKind::StepByStepReasoner, "followup") => &self.step_by_step.followup,
            (ComponentKind::RoleBasedReasoner, "initial") => &self.role_based.initial,
            (ComponentKind::RoleBasedReasoner, "followup") => &self.role_based.followup,
            (
                ComponentKind::SelfCriticIteration | ComponentKind::MultiSelfCriticIteration,
                "critic",
            ) => &self.self_critic.critic,
            (
                ComponentKind::SelfCriticIteration | ComponentKind::MultiSelfCriticIteration,
                "reflect",
            ) => &self.self_critic.reflect,
            (ComponentKind::DebateIteration, "instruction") => &self.debate.instruction,
            (ComponentKind::MajorityVoter, "header") => &self.majority_voter.header,
            (ComponentKind::MajorityVoter, "item") => &self.majority_voter.item,
            (ComponentKind::MajorityVoter, "footer") => &self.majority_voter.footer,
            (ComponentKind::ConsensusBuilder, "instruction") => &self.consensus.instruction,
            _ => return None,
        };
        Some(text)
    }

    /// The voting instruction enumerating every solution.
    pub fn voting_instruction(&self, solutions: &[&str]) -> String {
        let v = &self.majority_voter;
        let mut out = v.header.replace("{n}", &solutions.len().to_string());
        for (i, content) in solutions.iter().enumerate() {
            // {content} last so solution text is never re-substituted
            out.push_str(
                &v.item
                    .replace("{n}", &solutions.len().to_string())
                    .replace("{i}", &(i + 1).to_string())
                    .replace("{content}", content),
            );
        }
        out.push_str(&v.footer);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voting_instruction_layout() {
        let catalog = PromptCatalog::default();
        let text = catalog.voting_instruction(&["A \\boxed{1}", "B {i} \\boxed{2}"]);
        assert_eq!(
            text,
            "Given these 2 solutions to the same problem:\n\n\nSolution 1:\nA \\boxed{1}\n\nSolution 2:\nB {i} \\boxed{2}\n\nAnalyze these solutions and identify which answer appears most frequently.\nCopy that ENTIRE solution verbatim, including all reasoning steps.\nAfter copying the solution, ensure your final answer is in \\boxed{}."
        );
    }

    #[test]
    fn partial_override_keeps_defaults() {
        let catalog = PromptCatalog::from_toml(
            "[DebateIteration]\ninstruction = \"Argue.\"\n[RoleBasedReasoner]\nroles = [\"Chemist\"]\n",
        )
        .unwrap();
        assert_eq!(catalog.debate.instruction, "Argue.");
        assert_eq!(catalog.role_based.roles, ["Chemist"]);
        assert_eq!(catalog.role_based.followup, ROLE_BASED_FOLLOWUP);
        assert_eq!(catalog.step_by_step, ReasonerPrompts::default());
    }

    #[test]
    fn catalog_round_trips_through_toml() {
        let catalog = PromptCatalog::default();
        assert_eq!(PromptCatalog::from_toml(&catalog.to_toml()).unwrap(), catalog);
    }

    #[test]
    fn rejects_unknown_slots_and_empty_roles() {
        assert!(PromptCatalog::from_toml("[DebateIteration]\nopening = \"x\"\n").is_err());
        assert!(matches!(
            PromptCatalog::from_toml("[RoleBasedReasoner]\nroles = []\n"),
            Err(CatalogError::NoRoles)
        ));
    }

    #[test]
    fn lookup_by_kind_and_slot() {
        let c = PromptCatalog::default();
        assert_eq!(c.get(ComponentKind::StepByStepReasoner, "initial"), Some(BOXED_INITIAL));
        assert_eq!(c.get(ComponentKind::MultiSelfCriticIteration, "critic"), Some(CRITIC));
        assert_eq!(c.get(ComponentKind::MajorityVoter, "critic"), None);
    }
}
