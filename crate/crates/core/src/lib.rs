//! Temporal-logic action shielding for long-horizon agents.
//!
//! Laws of the form `G(cond -> X(act))` are checked online against each
//! proposed action ([`shield`]), a symbolic crafting world provides the task
//! ([`env`]), actors run episodes under the shield ([`actor`]), and an
//! offline critic induces, gates and repairs laws from logged trajectories
//! ([`critic`], [`graph`]). [`harness`] ties the loop together.

pub mod actor;
pub mod critic;
pub mod env;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod ltl;
pub mod shield;
pub mod vocab;

pub use actor::{run_episode, EpisodeConfig, Policy, StepOutcome, Termination, Trajectory};
pub use critic::{run_round, CandidateLaw, CriticRound};
pub use env::{is_goal, Env, EnvConfig, Primitive, WorldState};
pub use graph::BipartiteGraph;
pub use harness::{cmd_run, ExperimentConfig, HarnessError, MetricsReport};
pub use ltl::{
    eval_trace, parse_formula, parse_law, print_law, Formula, Law, LawShape, LawSource, LtlError, TraceVerdict,
};
pub use shield::{allowed_actions, check, filter_with_fallback, LawSet, OverconstraintReport, Verdict};
pub use vocab::{AbstractState, ActionVector, PropKind, Vocabulary};
