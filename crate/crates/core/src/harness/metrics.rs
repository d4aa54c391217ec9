//! Per-round experiment metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::actor::{StepOutcome, Trajectory};
use crate::vocab::Vocabulary;

/// Ladder propositions whose first appearance marks a subgoal.
pub const SUBGOALS: [(&str, &str); 4] = [
    ("wooden_tool", "obs_has_wood_pickaxe"),
    ("stone_tool", "obs_has_stone_pickaxe"),
    ("iron_tool", "obs_has_iron_pickaxe"),
    ("diamond", "obs_has_diamond"),
];

/// Primitives executed up to and including the step after which each
/// subgoal proposition first holds. `None` when never reached.
pub fn subgoal_counts(t: &Trajectory, vocab: &Vocabulary) -> [Option<usize>; 4] {
    let idx: Vec<Option<usize>> = SUBGOALS.iter().map(|(_, p)| vocab.observation_index(p)).collect();
    let mut out = [None; 4];
    let holds = |state: &crate::vocab::AbstractState, k: usize| idx[k].is_some_and(|i| state.get(i));
    let mut executed = 0;
    for (k, slot) in out.iter_mut().enumerate() {
        if t.steps.first().is_some_and(|s| holds(&s.abstract_state, k)) {
            *slot = Some(0);
        }
    }
    for tr in t.transitions() {
        executed += 1;
        for (k, slot) in out.iter_mut().enumerate() {
            if slot.is_none() && holds(tr.next, k) {
                *slot = Some(executed);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalStat {
    pub name: String,
    pub reached: usize,
    pub episodes: usize,
    /// Mean primitive count over the episodes that reached the subgoal.
    pub mean_primitives: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub law_count: usize,
    pub episodes: usize,
    pub goals: usize,
    pub subgoals: Vec<SubgoalStat>,
    pub executed_attempts: usize,
    pub env_errors: usize,
    pub proposals: usize,
    pub rejected: usize,
    pub fallback_steps: usize,
    /// Episode-level primitive counts, in seed order.
    pub primitives: Vec<usize>,
}

impl RoundMetrics {
    pub fn compute(round: u32, law_count: usize, trajectories: &[Trajectory], vocab: &Vocabulary) -> Self {
        let counts: Vec<[Option<usize>; 4]> = trajectories.iter().map(|t| subgoal_counts(t, vocab)).collect();
        let subgoals = SUBGOALS
            .iter()
            .enumerate()
            .map(|(k, (name, _))| {
                let hits: Vec<usize> = counts.iter().filter_map(|c| c[k]).collect();
                SubgoalStat {
                    name: (*name).to_string(),
                    reached: hits.len(),
                    episodes: trajectories.len(),
                    mean_primitives: (!hits.is_empty()).then(|| hits.iter().sum::<usize>() as f64 / hits.len() as f64),
                }
            })
            .collect();
        Self {
            round,
            law_count,
            episodes: trajectories.len(),
            goals: trajectories.iter().filter(|t| t.reached_goal()).count(),
            subgoals,
            executed_attempts: trajectories.iter().map(Trajectory::primitive_count).sum(),
            env_errors: trajectories.iter().map(Trajectory::env_error_count).sum(),
            proposals: trajectories.iter().map(Trajectory::proposal_count).sum(),
            rejected: trajectories.iter().map(Trajectory::rejected_count).sum(),
            fallback_steps: trajectories.iter().map(Trajectory::fallback_count).sum(),
            primitives: trajectories.iter().map(Trajectory::primitive_count).collect(),
        }
    }

    /// Environment errors over executed primitive attempts.
    pub fn failed_action_rate(&self) -> f64 {
        ratio(self.env_errors, self.executed_attempts)
    }

    /// Shield rejections over all proposals.
    pub fn shield_blocked_rate(&self) -> f64 {
        ratio(self.rejected, self.proposals)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts of environment errors grouped by `(violated precondition, action)`.
pub fn error_classes(trajectories: &[Trajectory]) -> std::collections::BTreeMap<(String, String), usize> {
    let mut out = std::collections::BTreeMap::new();
    for t in trajectories {
        for s in &t.steps {
            if let (StepOutcome::EnvError { precondition, .. }, Some(a)) = (&s.outcome, &s.executed_action) {
                *out.entry((precondition.clone(), a.clone())).or_insert(0) += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub max_steps: usize,
    pub retry_budget: usize,
    pub rounds: Vec<RoundMetrics>,
    /// Why the outer loop ended.
    pub stopped: String,
}

impl MetricsReport {
    pub fn last(&self) -> Option<&RoundMetrics> {
        self.rounds.last()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "policy: {}", self.policy);
        let _ = writeln!(
            out,
            "step limit: {} primitives per episode, retry budget {}",
            self.max_steps, self.retry_budget
        );
        let _ = writeln!(out, "stopped: {}", self.stopped);
        for r in &self.rounds {
            let _ = writeln!(out);
            let _ = writeln!(out, "round {} ({} laws, {} episodes)", r.round, r.law_count, r.episodes);
            let _ = writeln!(out, "  diamond: {}/{}", r.goals, r.episodes);
            for s in &r.subgoals {
                let mean = s
                    .mean_primitives
                    .map_or_else(|| "n/a".to_string(), |m| format!("{m:.1}"));
                let _ = writeln!(
                    out,
                    "  {:<12} {:>6} primitives  ({}/{})",
                    s.name, mean, s.reached, s.episodes
                );
            }
            let _ = writeln!(
                out,
                "  failed actions: {}/{} = {:.3}",
                r.env_errors,
                r.executed_attempts,
                r.failed_action_rate()
            );
            let _ = writeln!(
                out,
                "  shield blocked: {}/{} = {:.3}",
                r.rejected,
                r.proposals,
                r.shield_blocked_rate()
            );
            let _ = writeln!(out, "  fallback steps: {}", r.fallback_steps);
            let prims: Vec<String> = r.primitives.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "  primitives per episode: {}", prims.join(" "));
        }
        out
    }
}
