//! Offline law induction from logged trajectories.
//!
//! A round gathers three kinds of candidates: laws forbidding actions that
//! failed in the environment, laws forbidding observed actions that made no
//! progress towards the goal, and relaxations of laws that blocked every
//! action somewhere. Candidates must be grounded in an observed state, and
//! the resulting set must leave every observed state at least one action.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actor::{StepOutcome, Trajectory, Transport};
use crate::env::Primitive;
use crate::graph::{BipartiteGraph, GraphError};
use crate::ltl::{parse_formula, Formula, Law, LawShape, LawSource, LtlError};
use crate::shield::{allowed_actions, detect_overconstraint, LawSet, OverconstraintReport};
use crate::vocab::{AbstractState, Vocabulary};

#[derive(Debug, Error)]
pub enum CriticError {
    #[error("hard-safety laws alone block every action in state {0}; fix the hard law set")]
    HardConflict(String),
    #[error("trajectory {trajectory} step {step}: {source}")]
    Trajectory {
        trajectory: usize,
        step: usize,
        #[source]
        source: LtlError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Law(#[from] LtlError),
    #[error("external critic: {0}")]
    External(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Feedback,
    Efficiency,
    Repair,
    External,
}

impl fmt::Display for CandidateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateSource::Feedback => "feedback",
            CandidateSource::Efficiency => "efficiency",
            CandidateSource::Repair => "repair",
            CandidateSource::External => "external",
        })
    }
}

/// A trajectory step that grounds a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StepRef {
    pub trajectory: usize,
    pub step: usize,
}

impl fmt::Display for StepRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}:s{}", self.trajectory, self.step + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateLaw {
    pub law: Law,
    pub source: CandidateSource,
    pub evidence: Vec<StepRef>,
}

fn law_id(prefix: &str, text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    format!(
        "{prefix}-{:02x}{:02x}{:02x}{:02x}",
        digest[0], digest[1], digest[2], digest[3]
    )
}

/// Collects candidates keyed by canonical text, merging evidence.
#[derive(Default)]
struct Collector {
    order: Vec<CandidateLaw>,
    by_text: HashMap<String, usize>,
}

impl Collector {
    fn add(&mut self, candidate: CandidateLaw) {
        let text = candidate.law.text();
        match self.by_text.get(&text) {
            Some(&i) => {
                let existing = &mut self.order[i];
                for e in candidate.evidence {
                    if !existing.evidence.contains(&e) {
                        existing.evidence.push(e);
                    }
                }
            }
            None => {
                self.by_text.insert(text, self.order.len());
                self.order.push(candidate);
            }
        }
    }
}

/// One `G(!P -> X(!a))` law per distinct failed `(precondition, action)`.
pub fn induce_from_feedback(trajectories: &[Trajectory], vocab: &Vocabulary) -> Result<Vec<CandidateLaw>, CriticError> {
    let mut out = Collector::default();
    for (ti, t) in trajectories.iter().enumerate() {
        for (si, step) in t.steps.iter().enumerate() {
            let (StepOutcome::EnvError { precondition, message }, Some(action)) =
                (&step.outcome, &step.executed_action)
            else {
                continue;
            };
            let wrap = |source| CriticError::Trajectory {
                trajectory: ti,
                step: si,
                source,
            };
            let p = parse_formula(precondition, vocab).map_err(wrap)?;
            let a = Formula::atom(vocab, action).ok_or_else(|| {
                wrap(LtlError::UnknownProposition {
                    name: action.clone(),
                    position: 0,
                })
            })?;
            let formula = Formula::shield(p.not(), a.not());
            let text = formula.to_string();
            let law = Law::new(
                law_id("fb", &text),
                formula,
                LawSource::CriticFeedback,
                format!("environment rejected it: {message}"),
                vocab,
            )
            .map_err(wrap)?;
            out.add(CandidateLaw {
                law,
                source: CandidateSource::Feedback,
                evidence: vec![StepRef {
                    trajectory: ti,
                    step: si,
                }],
            });
        }
    }
    Ok(out.order)
}

fn state_condition(law: &Law) -> Option<&Formula> {
    match &law.shape {
        LawShape::ShieldForm { cond, .. } | LawShape::StateInvariant { cond } => Some(cond),
        LawShape::Unsupported => None,
    }
}

/// True iff the candidate's state condition holds in some observed state.
pub fn check_grounding(candidate: &CandidateLaw, trajectories: &[Trajectory]) -> bool {
    let Some(cond) = state_condition(&candidate.law) else {
        return false;
    };
    trajectories
        .iter()
        .flat_map(Trajectory::states)
        .any(|s| cond.eval_state(s).unwrap_or(false))
}

/// Possession proposition of the one-off item an action produces.
fn produced_item(action: &str) -> Option<&'static str> {
    match Primitive::from_name(action)? {
        Primitive::CraftWoodenPickaxe => Some("obs_has_wood_pickaxe"),
        Primitive::CraftStonePickaxe => Some("obs_has_stone_pickaxe"),
        Primitive::CraftIronPickaxe => Some("obs_has_iron_pickaxe"),
        Primitive::CraftCraftingTable => Some("obs_has_crafting_table"),
        Primitive::CraftFurnace => Some("obs_has_furnace"),
        _ => None,
    }
}

/// Outcome of the efficiency analysis, with a note when nothing could be
/// concluded.
#[derive(Debug, Clone, Default)]
pub struct EfficiencyAnalysis {
    pub candidates: Vec<CandidateLaw>,
    pub diagnostic: Option<String>,
}

/// Laws forbidding observed actions whose successor is no closer to the
/// goal than the state they were taken in.
///
/// The state condition is the produced item's possession proposition when
/// it already holds, otherwise the full conjunction describing the state.
/// A candidate that would block an action observed on a shortest path is
/// discarded. Failed actions are left to [`induce_from_feedback`].
pub fn efficiency_candidates(
    trajectories: &[Trajectory],
    graph: &BipartiteGraph,
    vocab: &Vocabulary,
) -> Result<EfficiencyAnalysis, CriticError> {
    if graph.goal_states().next().is_none() {
        return Ok(EfficiencyAnalysis {
            candidates: Vec::new(),
            diagnostic: Some("no observed trajectory reaches the goal; efficiency analysis skipped".into()),
        });
    }
    let dist = graph.distance_map();
    let distance = |s: &AbstractState| dist.get(s).copied().flatten();

    let mut efficient: Vec<(&AbstractState, usize)> = Vec::new();
    for (s, a) in graph.choice_edges() {
        let Some(d) = distance(s) else { continue };
        if graph
            .successors(s, a)
            .into_iter()
            .any(|t| distance(t).is_some_and(|dt| dt + 1 == d))
        {
            efficient.push((s, a));
        }
    }

    let mut out = Collector::default();
    for (ti, t) in trajectories.iter().enumerate() {
        for tr in t.transitions() {
            if !matches!(tr.outcome, StepOutcome::Ok) {
                continue;
            }
            let Some(d) = distance(tr.state) else { continue };
            if distance(tr.next).is_some_and(|dn| dn < d) {
                continue;
            }
            let action = vocab.action_from_name(tr.action).map_err(|e| CriticError::Trajectory {
                trajectory: ti,
                step: tr.index,
                source: LtlError::UnknownProposition {
                    name: e.to_string(),
                    position: 0,
                },
            })?;
            let general = produced_item(tr.action)
                .and_then(|name| Formula::atom(vocab, name))
                .filter(|f| f.eval_state(tr.state).unwrap_or(false));
            let cond = general.unwrap_or_else(|| Formula::minterm(tr.state, vocab));
            let blocks_efficient = efficient
                .iter()
                .any(|(s, a)| *a == action.index() && cond.eval_state(s).unwrap_or(false));
            if blocks_efficient {
                continue;
            }
            let formula = Formula::shield(cond, Formula::atom(vocab, tr.action).expect("known action").not());
            let text = formula.to_string();
            let law = Law::new(
                law_id("ef", &text),
                formula,
                LawSource::CriticEfficiency,
                format!("{} made no progress towards the goal", tr.action),
                vocab,
            )?;
            out.add(CandidateLaw {
                law,
                source: CandidateSource::Efficiency,
                evidence: vec![StepRef {
                    trajectory: ti,
                    step: tr.index,
                }],
            });
        }
    }
    Ok(EfficiencyAnalysis {
        candidates: out.order,
        diagnostic: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairEdit {
    pub law_id: String,
    pub state: AbstractState,
    pub before: String,
    pub after: String,
}

/// Relaxes non-hard laws until every reported state has an allowed action.
///
/// Each pass exempts the conflict state from the most constraining
/// non-hard law by conjoining the negated state minterm to its condition.
pub fn repair_overconstraint(
    reports: &[OverconstraintReport],
    laws: &mut LawSet,
    vocab: &Vocabulary,
) -> Result<Vec<RepairEdit>, CriticError> {
    let m = vocab.num_actions();
    let mut edits = Vec::new();
    for report in reports.iter().filter(|r| r.blocked_all) {
        let state = &report.state;
        while allowed_actions(state, laws, m).allowed.is_empty() {
            let current = detect_overconstraint(state, laws, m);
            let target = current
                .most_constraining
                .iter()
                .find(|id| laws.get(id).is_some_and(|l| !l.is_hard()))
                .cloned()
                .ok_or_else(|| CriticError::HardConflict(state.to_string()))?;
            let law = laws.get_mut(&target).expect("id from report");
            let LawShape::ShieldForm { cond, act, .. } = &law.shape else {
                unreachable!("only shield-form laws block actions")
            };
            let before = law.text();
            let relaxed = Formula::shield(cond.clone().and(Formula::minterm(state, vocab).not()), act.clone());
            let replacement = Law::new(law.id.clone(), relaxed, law.source, law.explanation.clone(), vocab)?
                .with_round(law.created_round);
            *law = replacement;
            edits.push(RepairEdit {
                law_id: target,
                state: state.clone(),
                before,
                after: law.text(),
            });
        }
    }
    Ok(edits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddedLaw {
    pub id: String,
    pub text: String,
    pub source: CandidateSource,
    pub evidence: Vec<StepRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub text: String,
    pub source: CandidateSource,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticRound {
    pub round: u32,
    pub trajectories: usize,
    pub added: Vec<AddedLaw>,
    pub edited: Vec<RepairEdit>,
    pub rejected: Vec<RejectedCandidate>,
    pub reports: Vec<OverconstraintReport>,
    pub diagnostics: Vec<String>,
}

impl CriticRound {
    /// Plain-text round report.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "critic round {} over {} trajectories",
            self.round, self.trajectories
        );
        let _ = writeln!(out, "added {} law(s)", self.added.len());
        for a in &self.added {
            let refs: Vec<String> = a.evidence.iter().map(ToString::to_string).collect();
            let _ = writeln!(
                out,
                "  + {} [{}] {}  evidence: {}",
                a.id,
                a.source,
                a.text,
                refs.join(", ")
            );
        }
        let _ = writeln!(out, "edited {} law(s)", self.edited.len());
        for e in &self.edited {
            let _ = writeln!(
                out,
                "  ~ {} at state {}\n      before: {}\n      after:  {}",
                e.law_id, e.state, e.before, e.after
            );
        }
        let _ = writeln!(out, "rejected {} candidate(s)", self.rejected.len());
        for r in &self.rejected {
            let _ = writeln!(out, "  - [{}] {}  ({})", r.source, r.text, r.reason);
        }
        let _ = writeln!(out, "over-constrained states: {}", self.reports.len());
        for r in &self.reports {
            let _ = writeln!(
                out,
                "  ! {} most constraining: {}",
                r.state,
                r.most_constraining.join(", ")
            );
        }
        for d in &self.diagnostics {
            let _ = writeln!(out, "note: {d}");
        }
        out
    }
}

#[derive(Serialize)]
struct ExternalRequest<'a> {
    round: u32,
    laws: Vec<String>,
    trajectories: &'a [Trajectory],
}

#[derive(Deserialize)]
struct ExternalResponse {
    laws: Vec<String>,
}

/// Asks an external critic for candidate law texts. Each is grounded in
/// the observed states where its condition holds.
pub fn external_candidates(
    transport: &mut dyn Transport,
    round: u32,
    trajectories: &[Trajectory],
    laws: &LawSet,
    vocab: &Vocabulary,
) -> Result<(Vec<CandidateLaw>, Vec<RejectedCandidate>), CriticError> {
    let request = ExternalRequest {
        round,
        laws: laws.laws().iter().map(Law::text).collect(),
        trajectories,
    };
    let body = serde_json::to_string(&request).map_err(|e| CriticError::External(e.to_string()))?;
    let reply = transport
        .exchange(&body)
        .map_err(|e| CriticError::External(e.to_string()))?;
    let response: ExternalResponse =
        serde_json::from_str(&reply).map_err(|e| CriticError::External(format!("malformed reply: {e}")))?;
    let mut out = Collector::default();
    let mut rejected = Vec::new();
    for text in response.laws {
        let formula = match parse_formula(&text, vocab) {
            Ok(f) => f,
            Err(e) => {
                rejected.push(RejectedCandidate {
                    text,
                    source: CandidateSource::External,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let canonical = formula.to_string();
        let law = match Law::new(
            law_id("ex", &canonical),
            formula,
            LawSource::CriticEfficiency,
            "external critic",
            vocab,
        ) {
            Ok(l) if matches!(l.shape, LawShape::ShieldForm { .. }) => l,
            Ok(_) => {
                rejected.push(RejectedCandidate {
                    text,
                    source: CandidateSource::External,
                    reason: "not of the form G(cond -> X(act))".into(),
                });
                continue;
            }
            Err(e) => {
                rejected.push(RejectedCandidate {
                    text,
                    source: CandidateSource::External,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let cond = state_condition(&law).expect("shield form");
        let evidence = trajectories
            .iter()
            .enumerate()
            .flat_map(|(ti, t)| {
                t.steps
                    .iter()
                    .enumerate()
                    .map(move |(si, s)| (ti, si, &s.abstract_state))
            })
            .filter(|(_, _, s)| cond.eval_state(s).unwrap_or(false))
            .map(|(trajectory, step, _)| StepRef { trajectory, step })
            .collect();
        out.add(CandidateLaw {
            law,
            source: CandidateSource::External,
            evidence,
        });
    }
    Ok((out.order, rejected))
}

/// Runs one critic round and returns the next law set.
pub fn run_round(
    trajectories: &[Trajectory],
    laws: &LawSet,
    vocab: &Vocabulary,
    external: Option<&mut dyn Transport>,
) -> Result<(LawSet, CriticRound), CriticError> {
    let round = laws.round + 1;
    let m = vocab.num_actions();
    let mut next = laws.clone();
    next.round = round;
    let mut record = CriticRound {
        round,
        trajectories: trajectories.len(),
        added: Vec::new(),
        edited: Vec::new(),
        rejected: Vec::new(),
        reports: Vec::new(),
        diagnostics: Vec::new(),
    };

    let mut observed: Vec<&AbstractState> = Vec::new();
    let mut seen = HashSet::new();
    for s in trajectories.iter().flat_map(Trajectory::states) {
        if seen.insert(s) {
            observed.push(s);
        }
    }

    for s in &observed {
        let report = detect_overconstraint(s, &next, m);
        if report.blocked_all {
            record.reports.push(report);
        }
    }
    record.edited = repair_overconstraint(&record.reports, &mut next, vocab)?;

    let graph = BipartiteGraph::build(trajectories, vocab)?;
    let mut candidates = induce_from_feedback(trajectories, vocab)?;
    let efficiency = efficiency_candidates(trajectories, &graph, vocab)?;
    candidates.extend(efficiency.candidates);
    record.diagnostics.extend(efficiency.diagnostic);
    if let Some(transport) = external {
        let (ext, rejected) = external_candidates(transport, round, trajectories, &next, vocab)?;
        candidates.extend(ext);
        record.rejected.extend(rejected);
    }

    let mut added: Vec<CandidateLaw> = Vec::new();
    for c in candidates {
        if next.contains_text(&c.law.text()) || added.iter().any(|a| a.law.text() == c.law.text()) {
            continue;
        }
        if c.evidence.is_empty() || !check_grounding(&c, trajectories) {
            record.rejected.push(RejectedCandidate {
                text: c.law.text(),
                source: c.source,
                reason: "condition holds in no observed state".into(),
            });
            continue;
        }
        let mut c = c;
        let mut id = c.law.id.clone();
        let mut k = 2;
        while next.get(&id).is_some() || added.iter().any(|a| a.law.id == id) {
            id = format!("{}-{k}", c.law.id);
            k += 1;
        }
        c.law.id = id;
        c.law.created_round = round;
        added.push(c);
    }

    // Feasibility: drop the newest blocking candidates until every observed
    // state keeps an allowed action.
    let mut trial = next.clone();
    for c in &added {
        trial.push(c.law.clone()).expect("ids made unique above");
    }
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    for s in &observed {
        while allowed_actions(s, &trial, m).allowed.is_empty() {
            let victim = added
                .iter()
                .rev()
                .find(|c| !dropped.contains(&c.law.id) && (0..m).any(|a| c.law.blocks(s, a)))
                .map(|c| c.law.id.clone());
            match victim {
                Some(id) => {
                    trial.remove(&id).expect("candidate is in the trial set");
                    dropped.insert(id);
                }
                None => {
                    // Pre-existing laws conflict here; the repair pass handles
                    // them on the next round's reports.
                    record
                        .diagnostics
                        .push(format!("state {s} remains over-constrained by existing laws"));
                    break;
                }
            }
        }
    }

    for c in added {
        if dropped.contains(&c.law.id) {
            record.rejected.push(RejectedCandidate {
                text: c.law.text(),
                source: c.source,
                reason: "would leave an observed state without any allowed action".into(),
            });
            continue;
        }
        record.added.push(AddedLaw {
            id: c.law.id.clone(),
            text: c.law.text(),
            source: c.source,
            evidence: c.evidence.clone(),
        });
        next.push(c.law).expect("ids made unique above");
    }
    Ok((next, record))
}
