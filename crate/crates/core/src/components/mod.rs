//! Runtime behavior of each grammar terminal.
//!
//! A component consumes a list of messages and produces a new one through
//! model calls made on a [`Session`]. Reasoners also hand their agent
//! profiles downstream so refinement and debate can continue with the same
//! personas.

mod message;
mod prompts;
mod session;

use tracing::warn;

pub use message::{format_inputs, AgentProfile, Message, TaskContext, DEFAULT_ROLE, DEFAULT_TEMPERATURE};
pub use prompts::{
    CatalogError, ConsensusPrompts, CriticPrompts, DebatePrompts, PromptCatalog, ReasonerPrompts,
    RoleBasedPrompts, VoterPrompts, CORRECT_TOKEN,
};
pub use session::{CallRecord, RunError, Session};

use crate::grammar::ComponentTerm;

pub const PLURAL_TEMPERATURE: f64 = 0.8;
pub const SINGULAR_TEMPERATURE: f64 = 0.5;
pub const AGGREGATOR_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReasonerStyle {
    StepByStep,
    RoleBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Majority,
    Consensus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentOutput {
    pub messages: Vec<Message>,
    /// Profiles behind `messages`, set only by reasoners.
    pub agents: Vec<AgentProfile>,
}

fn arity(component: ComponentTerm, expected: &'static str, got: usize) -> RunError {
    RunError::Arity {
        component: component.to_string(),
        expected,
        got,
    }
}

/// The `count` agents a reasoner instantiates.
pub fn reasoner_agents(style: ReasonerStyle, count: u32, roles: &[String]) -> Vec<AgentProfile> {
    let temperature = if count > 1 {
        PLURAL_TEMPERATURE
    } else {
        SINGULAR_TEMPERATURE
    };
    (0..count as usize)
        .map(|i| {
            let profile = match style {
                ReasonerStyle::StepByStep if count == 1 => AgentProfile::new("Chain-of-Thought Agent"),
                ReasonerStyle::StepByStep => AgentProfile::new(&format!("Chain-of-Thought Agent {}", i + 1)),
                ReasonerStyle::RoleBased => {
                    let role = roles.get(i % roles.len().max(1)).map_or(DEFAULT_ROLE, String::as_str);
                    let name = if count == 1 {
                        format!("Role-Based Agent ({role})")
                    } else {
                        format!("Role-Based Agent {} ({role})", i + 1)
                    };
                    AgentProfile::new(&name).with_role(role)
                }
            };
            profile.with_temperature(temperature)
        })
        .collect()
}

/// `count` independent answers. With no input every agent solves the task
/// directly; with one prior answer each builds on it.
pub fn run_reasoner(
    session: &mut Session<'_>,
    style: ReasonerStyle,
    count: u32,
    task: &TaskContext,
    inputs: &[Message],
) -> Result<ComponentOutput, RunError> {
    if inputs.len() > 1 {
        let term = match style {
            ReasonerStyle::StepByStep => ComponentTerm::step_by_step(count.max(1)),
            ReasonerStyle::RoleBased => ComponentTerm::role_based(count.max(1)),
        };
        return Err(arity(term, "at most one", inputs.len()));
    }
    let prompts = session.prompts().clone();
    let (initial, followup, roles) = match style {
        ReasonerStyle::StepByStep => (&prompts.step_by_step.initial, &prompts.step_by_step.followup, &[][..]),
        ReasonerStyle::RoleBased => (
            &prompts.role_based.initial,
            &prompts.role_based.followup,
            &prompts.role_based.roles[..],
        ),
    };
    let mut context = vec![task.message().clone()];
    context.extend(inputs.iter().cloned());
    let instruction = if inputs.is_empty() { initial } else { followup };
    let agents = reasoner_agents(style, count, roles);
    let messages = agents
        .iter()
        .map(|agent| session.ask(agent, &context, instruction, -1))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ComponentOutput { messages, agents })
}

/// Critic/refine loop over each input stream. The single-stream form takes
/// exactly one input, the multi-stream form at least two. A stream stops
/// early once its critic reports [`CORRECT_TOKEN`].
///
/// `agents[i]`, when present, answers the refinement calls of stream `i`.
pub fn run_self_critic(
    session: &mut Session<'_>,
    multi: bool,
    rounds: u32,
    task: &TaskContext,
    inputs: &[Message],
    agents: &[AgentProfile],
) -> Result<ComponentOutput, RunError> {
    let term = if multi {
        ComponentTerm::multi_self_critic(rounds.max(1))
    } else {
        ComponentTerm::self_critic(rounds.max(1))
    };
    match (multi, inputs.len()) {
        (false, 1) => {}
        (false, n) => return Err(arity(term, "exactly one", n)),
        (true, n) if n >= 2 => {}
        (true, n) => return Err(arity(term, "at least two", n)),
    }
    let prompts = session.prompts().clone();
    let mut messages = Vec::with_capacity(inputs.len());
    for (stream, first) in inputs.iter().enumerate() {
        let (critic, refiner) = if multi {
            (
                AgentProfile::new(&format!("Critic Agent {}", stream + 1)),
                agents
                    .get(stream)
                    .cloned()
                    .unwrap_or_else(|| AgentProfile::new(&format!("Refinement Agent {}", stream + 1))),
            )
        } else {
            (
                AgentProfile::new("Critic Agent"),
                agents
                    .first()
                    .cloned()
                    .unwrap_or_else(|| AgentProfile::new("Refinement Agent")),
            )
        };
        let mut history = vec![task.message().clone()];
        let mut answer = first.clone();
        for round in 0..rounds as i32 {
            let mut feedback = session.ask(
                &critic,
                &[task.message().clone(), answer.clone()],
                &prompts.self_critic.critic,
                round,
            )?;
            feedback.name = "feedback".into();
            if feedback.content.contains(CORRECT_TOKEN) {
                break;
            }
            history.push(answer);
            history.push(feedback);
            answer = session.ask(&refiner, &history, &prompts.self_critic.reflect, round + 1)?;
        }
        messages.push(answer);
    }
    Ok(ComponentOutput {
        messages,
        agents: Vec::new(),
    })
}

/// Fresh participants for a debate whose inputs did not come from a
/// reasoner.
pub fn debate_agents(n: usize) -> Vec<AgentProfile> {
    (0..n)
        .map(|i| AgentProfile::new(&format!("Debate Agent {}", i + 1)))
        .collect()
}

/// `rounds` rounds in which every agent sees all current answers and
/// replaces its own.
pub fn run_debate(
    session: &mut Session<'_>,
    rounds: u32,
    task: &TaskContext,
    inputs: &[Message],
    agents: &[AgentProfile],
) -> Result<ComponentOutput, RunError> {
    if inputs.len() < 2 {
        return Err(arity(ComponentTerm::debate(rounds.max(1)), "at least two", inputs.len()));
    }
    let fresh;
    let agents = if agents.len() == inputs.len() {
        agents
    } else {
        fresh = debate_agents(inputs.len());
        &fresh[..]
    };
    let instruction = session.prompts().debate.instruction.clone();
    let mut answers = inputs.to_vec();
    for round in 0..rounds as i32 {
        let mut context = vec![task.message().clone()];
        context.extend(answers.iter().cloned());
        answers = agents
            .iter()
            .map(|agent| session.ask(agent, &context, &instruction, round))
            .collect::<Result<Vec<_>, _>>()?;
    }
    Ok(ComponentOutput {
        messages: answers,
        agents: Vec::new(),
    })
}

/// Collapses all inputs into one answer with a single call.
pub fn run_aggregator(
    session: &mut Session<'_>,
    aggregation: Aggregation,
    task: &TaskContext,
    inputs: &[Message],
) -> Result<ComponentOutput, RunError> {
    let term = match aggregation {
        Aggregation::Majority => ComponentTerm::MajorityVoter,
        Aggregation::Consensus => ComponentTerm::ConsensusBuilder,
    };
    match inputs.len() {
        0 => return Err(arity(term, "at least one", 0)),
        1 => warn!(component = %term, "aggregating a single input"),
        _ => {}
    }
    let message = match aggregation {
        Aggregation::Majority => {
            let agent = AgentProfile::new("Voting Agent").with_temperature(AGGREGATOR_TEMPERATURE);
            let solutions: Vec<&str> = inputs.iter().map(|m| m.content.as_str()).collect();
            let instruction = session.prompts().voting_instruction(&solutions);
            session.ask(&agent, &[task.message().clone()], &instruction, -1)?
        }
        Aggregation::Consensus => {
            let agent = AgentProfile::new("Final Decision Agent").with_temperature(AGGREGATOR_TEMPERATURE);
            let mut context = vec![task.message().clone()];
            context.extend(inputs.iter().cloned());
            let instruction = session.prompts().consensus.instruction.clone();
            session.ask(&agent, &context, &instruction, -1)?
        }
    };
    Ok(ComponentOutput {
        messages: vec![message],
        agents: Vec::new(),
    })
}

/// Runs one terminal. `agents` are the profiles handed over by the
/// preceding component, empty if it was not a reasoner.
pub fn run_component(
    session: &mut Session<'_>,
    term: ComponentTerm,
    task: &TaskContext,
    inputs: &[Message],
    agents: &[AgentProfile],
) -> Result<ComponentOutput, RunError> {
    match term {
        ComponentTerm::StepByStepReasoner { count } => {
            run_reasoner(session, ReasonerStyle::StepByStep, count.get(), task, inputs)
        }
        ComponentTerm::RoleBasedReasoner { count } => {
            run_reasoner(session, ReasonerStyle::RoleBased, count.get(), task, inputs)
        }
        ComponentTerm::SelfCriticIteration { rounds } => {
            run_self_critic(session, false, rounds.get(), task, inputs, agents)
        }
        ComponentTerm::MultiSelfCriticIteration { rounds } => {
            run_self_critic(session, true, rounds.get(), task, inputs, agents)
        }
        ComponentTerm::DebateIteration { rounds } => run_debate(session, rounds.get(), task, inputs, agents),
        ComponentTerm::MajorityVoter => run_aggregator(session, Aggregation::Majority, task, inputs),
        ComponentTerm::ConsensusBuilder => run_aggregator(session, Aggregation::Consensus, task, inputs),
    }
}
