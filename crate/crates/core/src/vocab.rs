//! Proposition alphabet and the boolean abstraction of world states.
//!
//! A [`Vocabulary`] holds two dense, ordered registries: observation
//! propositions (`obs_*`) that describe a state, and action propositions
//! (`action_*`) that name the high-level primitives. Abstract states and
//! one-hot action vectors are indexed by these registries.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::WorldState;

/// Text of the bundled default vocabulary (30 observations, 20 actions).
pub const DEFAULT_VOCABULARY: &str = include_str!("../data/default.vocab");

/// Largest action alphabet supported; action sets are packed into a `u128`.
pub const MAX_ACTIONS: usize = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("line {line}: duplicate proposition name `{name}`")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: `{name}` must start with `{prefix}` in the [{section}] section")]
    WrongPrefix {
        line: usize,
        name: String,
        prefix: &'static str,
        section: &'static str,
    },
    #[error("section [{0}] is missing or empty")]
    EmptySection(&'static str),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("vocabulary declares {0} actions, at most {MAX_ACTIONS} are supported")]
    TooManyActions(usize),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown observation `{0}`")]
    UnknownObservation(String),
    #[error("invalid state bit `{0}`, expected 0 or 1")]
    StateBit(char),
    #[error("action vector of length {len} is not one-hot")]
    NotOneHot { len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropKind {
    Observation,
    Action,
}

impl PropKind {
    pub fn prefix(self) -> &'static str {
        match self {
            PropKind::Observation => "obs_",
            PropKind::Action => "action_",
        }
    }

    fn section(self) -> &'static str {
        match self {
            PropKind::Observation => "observations",
            PropKind::Action => "actions",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PropositionId {
    pub index: usize,
    pub name: String,
    pub kind: PropKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    observations: Vec<PropositionId>,
    actions: Vec<PropositionId>,
    // Canonical names and aliases.
    lookup: HashMap<String, (PropKind, usize)>,
}

impl Vocabulary {
    /// Parses the vocabulary file format: `[observations]` and `[actions]`
    /// sections, one identifier per line, `#` comments, optional
    /// `name = alias, alias` spellings.
    pub fn parse(source: &str) -> Result<Self, VocabError> {
        let mut observations = Vec::new();
        let mut actions = Vec::new();
        let mut lookup = HashMap::new();
        let mut section: Option<PropKind> = None;

        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                section = match header.strip_suffix(']').map(str::trim) {
                    Some("observations") => Some(PropKind::Observation),
                    Some("actions") => Some(PropKind::Action),
                    _ => {
                        return Err(VocabError::Syntax {
                            line: line_no,
                            message: format!("unknown section header `{line}`"),
                        })
                    }
                };
                continue;
            }
            let kind = section.ok_or_else(|| VocabError::Syntax {
                line: line_no,
                message: "proposition listed before any section header".into(),
            })?;
            let (name, aliases) = match line.split_once('=') {
                Some((name, rest)) => (name.trim(), rest.split(',').map(str::trim).collect::<Vec<_>>()),
                None => (line, Vec::new()),
            };
            let registry = match kind {
                PropKind::Observation => &mut observations,
                PropKind::Action => &mut actions,
            };
            let index = registry.len();
            for spelling in std::iter::once(name).chain(aliases.iter().copied()) {
                if !is_identifier(spelling) {
                    return Err(VocabError::Syntax {
                        line: line_no,
                        message: format!("`{spelling}` is not an identifier"),
                    });
                }
                if !spelling.starts_with(kind.prefix()) {
                    return Err(VocabError::WrongPrefix {
                        line: line_no,
                        name: spelling.to_string(),
                        prefix: kind.prefix(),
                        section: kind.section(),
                    });
                }
                if lookup.insert(spelling.to_string(), (kind, index)).is_some() {
                    return Err(VocabError::DuplicateName {
                        line: line_no,
                        name: spelling.to_string(),
                    });
                }
            }
            registry.push(PropositionId {
                index,
                name: name.to_string(),
                kind,
            });
        }

        if observations.is_empty() {
            return Err(VocabError::EmptySection("observations"));
        }
        if actions.is_empty() {
            return Err(VocabError::EmptySection("actions"));
        }
        if actions.len() > MAX_ACTIONS {
            return Err(VocabError::TooManyActions(actions.len()));
        }
        Ok(Self {
            observations,
            actions,
            lookup,
        })
    }

    /// The bundled default vocabulary.
    pub fn minecraft() -> Self {
        Self::parse(DEFAULT_VOCABULARY).expect("bundled vocabulary is valid")
    }

    /// Builds a vocabulary from plain name lists (no aliases).
    pub fn from_names<S: AsRef<str>>(observations: &[S], actions: &[S]) -> Result<Self, VocabError> {
        let mut text = String::from("[observations]\n");
        for name in observations {
            text.push_str(name.as_ref());
            text.push('\n');
        }
        text.push_str("[actions]\n");
        for name in actions {
            text.push_str(name.as_ref());
            text.push('\n');
        }
        Self::parse(&text)
    }

    pub fn observations(&self) -> &[PropositionId] {
        &self.observations
    }

    pub fn actions(&self) -> &[PropositionId] {
        &self.actions
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Resolves a canonical name or alias.
    pub fn lookup(&self, name: &str) -> Option<(PropKind, usize)> {
        self.lookup.get(name).copied()
    }

    pub fn observation_index(&self, name: &str) -> Option<usize> {
        match self.lookup(name) {
            Some((PropKind::Observation, i)) => Some(i),
            _ => None,
        }
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        match self.lookup(name) {
            Some((PropKind::Action, i)) => Some(i),
            _ => None,
        }
    }

    pub fn name(&self, kind: PropKind, index: usize) -> &str {
        match kind {
            PropKind::Observation => &self.observations[index].name,
            PropKind::Action => &self.actions[index].name,
        }
    }

    pub fn action_name(&self, action: ActionVector) -> &str {
        &self.actions[action.index()].name
    }

    /// One-hot vector for the named action.
    pub fn action_from_name(&self, name: &str) -> Result<ActionVector, VocabError> {
        self.action_index(name)
            .map(|i| ActionVector::new(i, self.num_actions()))
            .ok_or_else(|| VocabError::UnknownAction(name.to_string()))
    }

    /// Every one-hot action vector, in index order.
    pub fn all_actions(&self) -> impl Iterator<Item = ActionVector> + '_ {
        let m = self.num_actions();
        (0..m).map(move |i| ActionVector::new(i, m))
    }

    /// The state with every observation false.
    pub fn empty_state(&self) -> AbstractState {
        AbstractState::new(vec![false; self.num_observations()])
    }

    /// Builds a state from the names of its true propositions.
    pub fn state_from_true<S: AsRef<str>>(&self, names: &[S]) -> Result<AbstractState, VocabError> {
        let mut state = self.empty_state();
        for name in names {
            let i = self
                .observation_index(name.as_ref())
                .ok_or_else(|| VocabError::UnknownObservation(name.as_ref().to_string()))?;
            state.set(i, true);
        }
        Ok(state)
    }

    /// Canonical names of the propositions true in `state`.
    pub fn true_names(&self, state: &AbstractState) -> Vec<&str> {
        state
            .bits()
            .iter()
            .zip(&self.observations)
            .filter(|(bit, _)| **bit)
            .map(|(_, p)| p.name.as_str())
            .collect()
    }

    /// Serializes back to the file format (canonical names only).
    pub fn to_text(&self) -> String {
        let mut out = String::from("[observations]\n");
        for p in &self.observations {
            out.push_str(&p.name);
            out.push('\n');
        }
        out.push_str("\n[actions]\n");
        for p in &self.actions {
            out.push_str(&p.name);
            out.push('\n');
        }
        out
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A boolean valuation of the observation propositions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractState {
    bits: Vec<bool>,
}

impl AbstractState {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in &self.bits {
            f.write_str(if *bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for AbstractState {
    type Err = VocabError;

    /// Parses the `0`/`1` bitstring produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(VocabError::StateBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(AbstractState::new)
    }
}

impl Serialize for AbstractState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AbstractState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A one-hot action vector, stored as its set index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionVector {
    index: usize,
    len: usize,
}

impl ActionVector {
    pub fn new(index: usize, len: usize) -> Self {
        assert!(index < len, "action index {index} out of range for {len} actions");
        Self { index, len }
    }

    /// Accepts an explicit bit vector; exactly one bit must be set.
    pub fn from_bits(bits: &[bool]) -> Result<Self, VocabError> {
        let mut set = bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i);
        match (set.next(), set.next()) {
            (Some(i), None) => Ok(Self::new(i, bits.len())),
            _ => Err(VocabError::NotOneHot { len: bits.len() }),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| i == self.index).collect()
    }
}

/// Computes the abstract state of `world` under `vocab`.
///
/// Observation names the simulator does not know evaluate to false.
pub fn abstract_state(world: &WorldState, vocab: &Vocabulary) -> AbstractState {
    AbstractState::new(
        vocab
            .observations()
            .iter()
            .map(|p| world.observe(&p.name).unwrap_or(false))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vocabulary_has_thirty_observations_and_twenty_actions() {
        let v = Vocabulary::minecraft();
        assert_eq!(v.num_observations(), 30);
        assert_eq!(v.num_actions(), 20);
        for (i, p) in v.observations().iter().enumerate() {
            assert_eq!(p.index, i);
            assert!(p.name.starts_with("obs_"));
        }
        for (i, p) in v.actions().iter().enumerate() {
            assert_eq!(p.index, i);
            assert!(p.name.starts_with("action_"));
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let err = Vocabulary::parse("[observations]\nobs_has_log\nobs_has_log\n[actions]\naction_a\n").unwrap_err();
        assert!(matches!(err, VocabError::DuplicateName { ref name, .. } if name == "obs_has_log"));
    }

    #[test]
    fn alias_colliding_with_name_is_duplicate() {
        let err = Vocabulary::parse("[observations]\nobs_a\nobs_b = obs_a\n[actions]\naction_a\n").unwrap_err();
        assert!(matches!(err, VocabError::DuplicateName { .. }));
    }

    #[test]
    fn missing_observation_section_is_empty_section() {
        let err = Vocabulary::parse("[actions]\naction_mine_log\n").unwrap_err();
        assert_eq!(err, VocabError::EmptySection("observations"));
    }

    #[test]
    fn wrong_prefix_is_rejected() {
        let err = Vocabulary::parse("[observations]\naction_x\n[actions]\naction_y\n").unwrap_err();
        assert!(matches!(err, VocabError::WrongPrefix { .. }));
    }

    #[test]
    fn aliases_resolve_to_canonical_index() {
        let v = Vocabulary::minecraft();
        assert_eq!(
            v.observation_index("obs_has_wooden_pickaxe"),
            v.observation_index("obs_has_wood_pickaxe")
        );
        assert_eq!(
            v.action_index("action_equip_wooden_pickaxe"),
            v.action_index("action_equip_wood_pickaxe")
        );
    }

    #[test]
    fn action_names_round_trip() {
        let v = Vocabulary::minecraft();
        let a = v.action_from_name("action_mine_log").unwrap();
        assert_eq!(a.index(), 0);
        assert_eq!(a.bits().iter().filter(|b| **b).count(), 1);
        for p in v.actions() {
            let vec = v.action_from_name(&p.name).unwrap();
            assert_eq!(v.action_name(vec), p.name);
        }
        assert_eq!(
            v.action_from_name("action_fly"),
            Err(VocabError::UnknownAction("action_fly".into()))
        );
    }

    #[test]
    fn from_bits_requires_exactly_one_bit() {
        assert!(ActionVector::from_bits(&[false, true, false]).is_ok());
        assert!(ActionVector::from_bits(&[false, false]).is_err());
        assert!(ActionVector::from_bits(&[true, true]).is_err());
    }

    #[test]
    fn text_round_trip_preserves_order() {
        let v = Vocabulary::minecraft();
        let again = Vocabulary::parse(&v.to_text()).unwrap();
        assert_eq!(v.observations(), again.observations());
        assert_eq!(v.actions(), again.actions());
    }
}
