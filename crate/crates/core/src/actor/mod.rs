//! The online actor loop: describe the state, ask a policy for an action,
//! check it against the shield, re-prompt on rejection, execute, record.

mod external;
mod policies;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{is_goal, Env, EnvError, Outcome};
use crate::shield::{check, filter_with_fallback, LawSet};
use crate::vocab::{AbstractState, ActionVector, VocabError, Vocabulary};

pub use external::{ExternalPolicy, HttpTransport, StdioTransport, Transport};
pub use policies::{FixedPolicy, RandomAllowed, ScriptedGreedy};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy proposed unknown action `{0}`")]
    UnknownAction(String),
    #[error("policy transport failed: {0}")]
    Transport(String),
    #[error("policy response malformed: {0}")]
    Malformed(String),
    #[error("policy timed out after {0} ms")]
    Timeout(u64),
}

#[derive(Debug, Error)]
pub enum ActorError {
    #[error("step {step}: {source}")]
    Policy {
        step: usize,
        #[source]
        source: PolicyError,
    },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("max_steps and retry_budget must be at least 1")]
    InvalidConfig,
    #[error("unknown builtin policy `{0}`")]
    UnknownPolicy(String),
}

/// What a policy sees when asked for an action.
#[derive(Debug, Clone)]
pub struct DecisionContext<'a> {
    pub step: usize,
    pub full_state: &'a str,
    pub abstract_state: &'a AbstractState,
    pub vocab: &'a Vocabulary,
    /// Shield rejection feedback, or the environment error of the previous step.
    pub feedback: Option<&'a str>,
    pub retry: usize,
    /// Allowed action names, present only for policies that ask for them.
    pub allowed_actions: Option<&'a [String]>,
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Whether the loop should compute and pass the allowed action set.
    fn wants_allowed_set(&self) -> bool {
        false
    }

    /// Called at the start of each episode.
    fn reset(&mut self, _seed: u64) {}

    /// Returns an action name, or `None` to give up on this decision.
    fn propose(&mut self, ctx: &DecisionContext<'_>) -> Result<Option<String>, PolicyError>;
}

/// Instantiates a builtin policy by name. `external` is built separately
/// because it needs a transport.
pub fn builtin_policy(name: &str, vocab: &Vocabulary) -> Result<Box<dyn Policy + Send>, ActorError> {
    match name {
        "scripted_greedy" => Ok(Box::new(ScriptedGreedy::new(vocab)?)),
        "random_allowed" => Ok(Box::new(RandomAllowed::new())),
        "random_uniform" => Ok(Box::new(RandomAllowed::uniform())),
        other => Err(ActorError::UnknownPolicy(other.to_string())),
    }
}

pub const BUILTIN_POLICIES: [&str; 4] = ["scripted_greedy", "random_allowed", "random_uniform", "external"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: usize,
    pub retry_budget: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_steps: 200,
            retry_budget: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub action: String,
    pub allowed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violated_law_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepOutcome {
    Ok,
    EnvError { precondition: String, message: String },
    ShieldBlockedExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub abstract_state: AbstractState,
    pub full_state: String,
    pub proposals: Vec<Proposal>,
    pub executed_action: Option<String>,
    pub outcome: StepOutcome,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Goal,
    StepLimit,
    Deadlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub law_round: u32,
    pub policy: String,
    pub steps: Vec<StepRecord>,
    pub final_state: AbstractState,
    pub terminated: Termination,
}

/// One executed step: state, action, whether it failed, successor state.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub index: usize,
    pub state: &'a AbstractState,
    pub action: &'a str,
    pub outcome: &'a StepOutcome,
    pub next: &'a AbstractState,
}

impl Trajectory {
    /// Number of executed primitives, failed attempts included.
    pub fn primitive_count(&self) -> usize {
        self.steps.iter().filter(|s| s.executed_action.is_some()).count()
    }

    pub fn reached_goal(&self) -> bool {
        self.terminated == Termination::Goal
    }

    /// Every visited abstract state, final state included.
    pub fn states(&self) -> impl Iterator<Item = &AbstractState> {
        self.steps
            .iter()
            .map(|s| &s.abstract_state)
            .chain(std::iter::once(&self.final_state))
    }

    pub fn transitions(&self) -> impl Iterator<Item = Transition<'_>> {
        self.steps.iter().enumerate().filter_map(move |(i, s)| {
            let action = s.executed_action.as_deref()?;
            let next = self.steps.get(i + 1).map_or(&self.final_state, |n| &n.abstract_state);
            Some(Transition {
                index: i,
                state: &s.abstract_state,
                action,
                outcome: &s.outcome,
                next,
            })
        })
    }

    /// `(state, executed action)` pairs plus the final state, as monitored by
    /// [`crate::ltl::eval_trace`].
    pub fn monitor_steps(&self, vocab: &Vocabulary) -> Result<Vec<(&AbstractState, Option<ActionVector>)>, VocabError> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        for s in &self.steps {
            let action = s
                .executed_action
                .as_deref()
                .map(|a| vocab.action_from_name(a))
                .transpose()?;
            out.push((&s.abstract_state, action));
        }
        out.push((&self.final_state, None));
        Ok(out)
    }

    pub fn proposal_count(&self) -> usize {
        self.steps.iter().map(|s| s.proposals.len()).sum()
    }

    pub fn rejected_count(&self) -> usize {
        self.steps
            .iter()
            .flat_map(|s| &s.proposals)
            .filter(|p| !p.allowed)
            .count()
    }

    pub fn env_error_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s.outcome, StepOutcome::EnvError { .. }))
            .count()
    }

    pub fn fallback_count(&self) -> usize {
        self.steps.iter().filter(|s| s.used_fallback).count()
    }
}

/// Runs one episode from `env.init(seed)`.
pub fn run_episode(
    env: &Env,
    policy: &mut dyn Policy,
    laws: &LawSet,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<Trajectory, ActorError> {
    if config.max_steps == 0 || config.retry_budget == 0 {
        return Err(ActorError::InvalidConfig);
    }
    let vocab = env.vocab();
    let m = vocab.num_actions();
    let hard = laws.hard_subset();
    let mut world = env.init(seed);
    policy.reset(seed);

    let mut steps = Vec::new();
    let mut env_feedback: Option<String> = None;
    let mut terminated = Termination::StepLimit;

    for step in 0..config.max_steps {
        let state = env.abstract_state(&world);
        if is_goal(&state, vocab) {
            terminated = Termination::Goal;
            break;
        }
        let full_state = world.render_full();

        let Ok(filtered) = filter_with_fallback(&state, laws, m) else {
            steps.push(StepRecord {
                step,
                abstract_state: state,
                full_state,
                proposals: Vec::new(),
                executed_action: None,
                outcome: StepOutcome::ShieldBlockedExhausted,
                used_fallback: true,
            });
            terminated = Termination::Deadlock;
            break;
        };
        let active = if filtered.used_fallback { &hard } else { laws };
        let allowed_names: Option<Vec<String>> = policy
            .wants_allowed_set()
            .then(|| filtered.allowed.names(vocab).into_iter().map(str::to_string).collect());

        let mut proposals = Vec::new();
        let mut feedback = env_feedback.take();
        let mut chosen = None;
        for retry in 0..config.retry_budget {
            let ctx = DecisionContext {
                step,
                full_state: &full_state,
                abstract_state: &state,
                vocab,
                feedback: feedback.as_deref(),
                retry,
                allowed_actions: allowed_names.as_deref(),
            };
            let proposal = policy
                .propose(&ctx)
                .map_err(|source| ActorError::Policy { step, source })?;
            let Some(name) = proposal else { break };
            let action = vocab.action_from_name(&name).map_err(|_| ActorError::Policy {
                step,
                source: PolicyError::UnknownAction(name.clone()),
            })?;
            let verdict = check(&state, action, active, vocab);
            proposals.push(Proposal {
                action: vocab.action_name(action).to_string(),
                allowed: verdict.allowed,
                violated_law_ids: verdict.violated_law_ids,
            });
            if verdict.allowed {
                chosen = Some(action);
                break;
            }
            feedback = Some(verdict.feedback);
        }

        let Some(action) = chosen else {
            steps.push(StepRecord {
                step,
                abstract_state: state,
                full_state,
                proposals,
                executed_action: None,
                outcome: StepOutcome::ShieldBlockedExhausted,
                used_fallback: filtered.used_fallback,
            });
            terminated = Termination::Deadlock;
            break;
        };

        let result = env.step(&world, action)?;
        let outcome = match result.outcome {
            Outcome::Ok => StepOutcome::Ok,
            Outcome::EnvError { precondition, message } => {
                env_feedback = Some(message.clone());
                StepOutcome::EnvError {
                    precondition: precondition.to_string(),
                    message,
                }
            }
        };
        steps.push(StepRecord {
            step,
            abstract_state: state,
            full_state,
            proposals,
            executed_action: Some(vocab.action_name(action).to_string()),
            outcome,
            used_fallback: filtered.used_fallback,
        });
        world = result.world;
    }

    let final_state = env.abstract_state(&world);
    if terminated == Termination::StepLimit && is_goal(&final_state, vocab) {
        terminated = Termination::Goal;
    }
    Ok(Trajectory {
        seed,
        law_round: laws.round,
        policy: policy.name().to_string(),
        steps,
        final_state,
        terminated,
    })
}
