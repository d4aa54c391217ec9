//! The online verifier: filters proposed actions against the active laws.
//!
//! Only shield-form laws take part in filtering; state invariants are trace
//! monitors and never block an action.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{ActionSet, Law, LawShape};
use crate::vocab::{AbstractState, ActionVector, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShieldError {
    #[error("duplicate law id `{0}`")]
    DuplicateLawId(String),
    #[error("unknown law id `{0}`")]
    UnknownLaw(String),
    #[error("hard-safety laws block every action in state {state}")]
    HardSetBlocksAll { state: String },
}

/// An ordered collection of laws with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LawSet {
    laws: Vec<Law>,
    /// Number of critic rounds applied so far.
    pub round: u32,
}

impl LawSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_laws(laws: impl IntoIterator<Item = Law>) -> Result<Self, ShieldError> {
        let mut set = Self::new();
        for law in laws {
            set.push(law)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, law: Law) -> Result<(), ShieldError> {
        if self.get(&law.id).is_some() {
            return Err(ShieldError::DuplicateLawId(law.id));
        }
        self.laws.push(law);
        Ok(())
    }

    pub fn extend(&mut self, other: LawSet) -> Result<(), ShieldError> {
        for law in other.laws {
            self.push(law)?;
        }
        Ok(())
    }

    pub fn laws(&self) -> &[Law] {
        &self.laws
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Law> {
        self.laws.iter().find(|l| l.id == id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Law> {
        self.laws.iter_mut().find(|l| l.id == id)
    }

    /// Removes a law by id. Returns the removed law.
    pub fn remove(&mut self, id: &str) -> Result<Law, ShieldError> {
        let pos = self
            .laws
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| ShieldError::UnknownLaw(id.to_string()))?;
        Ok(self.laws.remove(pos))
    }

    /// True if some law already has this canonical text.
    pub fn contains_text(&self, text: &str) -> bool {
        self.laws.iter().any(|l| l.text() == text)
    }

    /// The hard-safety subset, in order.
    pub fn hard_subset(&self) -> LawSet {
        LawSet {
            laws: self.laws.iter().filter(|l| l.is_hard()).cloned().collect(),
            round: self.round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub allowed: bool,
    pub violated_law_ids: Vec<String>,
    pub feedback: String,
}

/// Checks one proposed action.
pub fn check(state: &AbstractState, action: ActionVector, laws: &LawSet, vocab: &Vocabulary) -> Verdict {
    let violated: Vec<&Law> = laws
        .laws()
        .iter()
        .filter(|law| law.blocks(state, action.index()))
        .collect();
    let feedback = if violated.is_empty() {
        String::new()
    } else {
        let mut text = format!("Action {} is invalid in the current state.", vocab.action_name(action));
        for law in &violated {
            text.push_str(&format!(" Violates rule {}: {}", law.id, law.text()));
            if !law.explanation.is_empty() {
                text.push_str(&format!(" ({})", law.explanation));
            }
            text.push('.');
        }
        text.push_str(" Choose a different action.");
        text
    };
    Verdict {
        allowed: violated.is_empty(),
        violated_law_ids: violated.iter().map(|l| l.id.clone()).collect(),
        feedback,
    }
}

/// The permitted actions in a state, plus the ids blocking each action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowedActions {
    pub allowed: ActionSet,
    /// Indexed by action; empty for allowed actions.
    pub blocking: Vec<Vec<String>>,
}

impl AllowedActions {
    pub fn actions(&self) -> Vec<ActionVector> {
        let m = self.allowed.universe();
        self.allowed.iter().map(|i| ActionVector::new(i, m)).collect()
    }

    pub fn names<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        self.allowed.iter().map(|i| vocab.actions()[i].name.as_str()).collect()
    }
}

pub fn allowed_actions(state: &AbstractState, laws: &LawSet, num_actions: usize) -> AllowedActions {
    let mut blocked = ActionSet::empty(num_actions);
    let mut blocking = vec![Vec::new(); num_actions];
    for law in laws.laws() {
        let LawShape::ShieldForm { cond, permitted, .. } = &law.shape else {
            continue;
        };
        if !cond.eval_state(state).unwrap_or(false) {
            continue;
        }
        let denied = permitted.complement();
        for a in denied.iter() {
            blocking[a].push(law.id.clone());
        }
        blocked = blocked.union(denied);
    }
    AllowedActions {
        allowed: blocked.complement(),
        blocking,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverconstraintReport {
    pub state: AbstractState,
    pub blocked_all: bool,
    /// Law id to the number of actions that law blocks in `state`.
    pub blocking_counts: BTreeMap<String, usize>,
    /// Ids by blocked-action count descending, ties by id.
    pub most_constraining: Vec<String>,
}

pub fn detect_overconstraint(state: &AbstractState, laws: &LawSet, num_actions: usize) -> OverconstraintReport {
    let allowed = allowed_actions(state, laws, num_actions);
    let mut blocking_counts = BTreeMap::new();
    for ids in &allowed.blocking {
        for id in ids {
            *blocking_counts.entry(id.clone()).or_insert(0) += 1;
        }
    }
    let mut most_constraining: Vec<(String, usize)> = blocking_counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
    most_constraining.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    OverconstraintReport {
        state: state.clone(),
        blocked_all: allowed.allowed.is_empty(),
        blocking_counts,
        most_constraining: most_constraining.into_iter().map(|(id, _)| id).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtered {
    pub allowed: AllowedActions,
    pub used_fallback: bool,
    pub report: Option<OverconstraintReport>,
}

/// Filters with the full set; if that blocks everything, falls back to the
/// hard-safety subset for this decision only.
pub fn filter_with_fallback(state: &AbstractState, laws: &LawSet, num_actions: usize) -> Result<Filtered, ShieldError> {
    let full = allowed_actions(state, laws, num_actions);
    if !full.allowed.is_empty() {
        return Ok(Filtered {
            allowed: full,
            used_fallback: false,
            report: None,
        });
    }
    let report = detect_overconstraint(state, laws, num_actions);
    let hard = allowed_actions(state, &laws.hard_subset(), num_actions);
    if hard.allowed.is_empty() {
        return Err(ShieldError::HardSetBlocksAll {
            state: state.to_string(),
        });
    }
    Ok(Filtered {
        allowed: hard,
        used_fallback: true,
        report: Some(report),
    })
}
