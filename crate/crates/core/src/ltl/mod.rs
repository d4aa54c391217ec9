//! Temporal-logic laws over the proposition vocabulary.
//!
//! The full operator set (`X`, `G`, `F`, `U`) parses, but only two law
//! shapes are monitored:
//!
//! * shield form `G(cond -> X(act))`: whenever `cond` holds in a state, the
//!   action chosen in that state must satisfy `act`;
//! * state invariant `G(cond)`: every visited state satisfies `cond`.
//!
//! Everything else classifies as [`LawShape::Unsupported`] and is rejected by
//! [`eval_trace`].

mod parse;
mod print;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocab::{AbstractState, ActionVector, PropKind, Vocabulary};

pub use parse::parse_formula;
pub(crate) use parse::valid_law_id;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown proposition `{name}` at offset {position}")]
    UnknownProposition { name: String, position: usize },
    #[error("{part} may only mention {expected} propositions, found `{found}`")]
    MixedAtoms {
        part: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("action condition `{0}` is not satisfied by any one-hot action")]
    UnsatisfiableAction(String),
    #[error("temporal operator in a propositional context")]
    TemporalOperator,
    #[error("proposition index {index} out of range for a vector of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("law `{0}` is outside the monitored fragment")]
    UnsupportedShape(String),
    #[error("invalid law id `{0}`")]
    InvalidId(String),
    #[error("unknown law source `{0}`")]
    UnknownSource(String),
    #[error("line {line}: {message}")]
    LawFile { line: usize, message: String },
    #[error("line {line}: {source}")]
    LawFileEntry {
        line: usize,
        #[source]
        source: Box<LtlError>,
    },
}

/// A resolved proposition reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub kind: PropKind,
    pub index: usize,
    /// Canonical name, kept so formulas print without a vocabulary.
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Globally(Box<Formula>),
    Finally(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(vocab: &Vocabulary, name: &str) -> Option<Formula> {
        let (kind, index) = vocab.lookup(name)?;
        Some(Formula::Atom(Atom {
            kind,
            index,
            name: vocab.name(kind, index).to_string(),
        }))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    /// Left-nested conjunction; `True` for an empty input.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts.into_iter().reduce(Formula::and).unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `False` for an empty input.
    pub fn disjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    /// `G(cond -> X(act))`.
    pub fn shield(cond: Formula, act: Formula) -> Formula {
        Formula::Globally(Box::new(Formula::Implies(
            Box::new(cond),
            Box::new(Formula::Next(Box::new(act))),
        )))
    }

    /// The full minterm of `state`: every observation as a positive or
    /// negated literal, in vocabulary order.
    pub fn minterm(state: &AbstractState, vocab: &Vocabulary) -> Formula {
        Formula::conjunction(vocab.observations().iter().map(|p| {
            let lit = Formula::Atom(Atom {
                kind: PropKind::Observation,
                index: p.index,
                name: p.name.clone(),
            });
            if state.get(p.index) {
                lit
            } else {
                lit.not()
            }
        }))
    }

    pub fn is_temporal(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => false,
            Formula::Not(f) => f.is_temporal(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.is_temporal() || b.is_temporal(),
            Formula::Next(_) | Formula::Globally(_) | Formula::Finally(_) | Formula::Until(..) => true,
        }
    }

    /// Visits every atom.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) | Formula::Next(f) | Formula::Globally(f) | Formula::Finally(f) => f.collect_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Propositional evaluation against a bit vector of `kind` propositions.
    pub fn eval_prop(&self, kind: PropKind, bits: &[bool]) -> Result<bool, LtlError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => {
                if a.kind != kind {
                    return Err(LtlError::MixedAtoms {
                        part: "evaluated formula",
                        expected: kind_label(kind),
                        found: a.name.clone(),
                    });
                }
                *bits.get(a.index).ok_or(LtlError::IndexOutOfRange {
                    index: a.index,
                    len: bits.len(),
                })?
            }
            Formula::Not(f) => !f.eval_prop(kind, bits)?,
            Formula::And(a, b) => a.eval_prop(kind, bits)? && b.eval_prop(kind, bits)?,
            Formula::Or(a, b) => a.eval_prop(kind, bits)? || b.eval_prop(kind, bits)?,
            Formula::Implies(a, b) => !a.eval_prop(kind, bits)? || b.eval_prop(kind, bits)?,
            Formula::Next(_) | Formula::Globally(_) | Formula::Finally(_) | Formula::Until(..) => {
                return Err(LtlError::TemporalOperator)
            }
        })
    }

    pub fn eval_state(&self, state: &AbstractState) -> Result<bool, LtlError> {
        self.eval_prop(PropKind::Observation, state.bits())
    }

    pub fn eval_action(&self, action: ActionVector) -> Result<bool, LtlError> {
        self.eval_prop(PropKind::Action, &action.bits())
    }

    /// The set of one-hot actions satisfying an action-only formula,
    /// computed by set algebra (an atom holds for exactly its own action).
    pub fn one_hot_models(&self, num_actions: usize) -> Result<ActionSet, LtlError> {
        let all = ActionSet::full(num_actions);
        Ok(match self {
            Formula::True => all,
            Formula::False => ActionSet::empty(num_actions),
            Formula::Atom(a) => {
                if a.kind != PropKind::Action {
                    return Err(LtlError::MixedAtoms {
                        part: "action condition",
                        expected: "action",
                        found: a.name.clone(),
                    });
                }
                if a.index >= num_actions {
                    return Err(LtlError::IndexOutOfRange {
                        index: a.index,
                        len: num_actions,
                    });
                }
                ActionSet::singleton(a.index, num_actions)
            }
            Formula::Not(f) => f.one_hot_models(num_actions)?.complement(),
            Formula::And(a, b) => a.one_hot_models(num_actions)?.intersect(b.one_hot_models(num_actions)?),
            Formula::Or(a, b) => a.one_hot_models(num_actions)?.union(b.one_hot_models(num_actions)?),
            Formula::Implies(a, b) => a
                .one_hot_models(num_actions)?
                .complement()
                .union(b.one_hot_models(num_actions)?),
            Formula::Next(_) | Formula::Globally(_) | Formula::Finally(_) | Formula::Until(..) => {
                return Err(LtlError::TemporalOperator)
            }
        })
    }
}

fn kind_label(kind: PropKind) -> &'static str {
    match kind {
        PropKind::Observation => "observation",
        PropKind::Action => "action",
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_formula(f, self)
    }
}

/// A set of actions packed into a bitmask, indexed like the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionSet {
    bits: u128,
    len: usize,
}

impl ActionSet {
    fn mask(len: usize) -> u128 {
        if len >= 128 {
            u128::MAX
        } else {
            (1u128 << len) - 1
        }
    }

    pub fn empty(len: usize) -> Self {
        Self { bits: 0, len }
    }

    pub fn full(len: usize) -> Self {
        Self {
            bits: Self::mask(len),
            len,
        }
    }

    pub fn singleton(index: usize, len: usize) -> Self {
        Self {
            bits: 1u128 << index,
            len,
        }
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.len && self.bits >> index & 1 == 1
    }

    pub fn insert(&mut self, index: usize) {
        self.bits |= 1u128 << index;
    }

    pub fn complement(self) -> Self {
        Self {
            bits: !self.bits & Self::mask(self.len),
            len: self.len,
        }
    }

    pub fn intersect(self, other: Self) -> Self {
        Self {
            bits: self.bits & other.bits,
            len: self.len,
        }
    }

    pub fn union(self, other: Self) -> Self {
        Self {
            bits: self.bits | other.bits,
            len: self.len,
        }
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.bits & !other.bits == 0
    }

    /// Members in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |i| self.contains(*i))
    }
}

/// Where a law came from. Hard-safety laws are never edited by the critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSource {
    HardSafety,
    CriticFeedback,
    CriticEfficiency,
    CriticRepair,
}

impl LawSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LawSource::HardSafety => "hard_safety",
            LawSource::CriticFeedback => "critic_feedback",
            LawSource::CriticEfficiency => "critic_efficiency",
            LawSource::CriticRepair => "critic_repair",
        }
    }
}

impl fmt::Display for LawSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LawSource {
    type Err = LtlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "hard_safety" => LawSource::HardSafety,
            "critic_feedback" => LawSource::CriticFeedback,
            "critic_efficiency" => LawSource::CriticEfficiency,
            "critic_repair" => LawSource::CriticRepair,
            other => return Err(LtlError::UnknownSource(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LawShape {
    /// `G(cond -> X(act))`. `permitted` caches the one-hot models of `act`.
    ShieldForm {
        cond: Formula,
        act: Formula,
        permitted: ActionSet,
    },
    StateInvariant {
        cond: Formula,
    },
    Unsupported,
}

impl LawShape {
    /// Classifies a formula, validating the shield and invariant parts.
    pub fn classify(formula: &Formula, num_actions: usize) -> Result<LawShape, LtlError> {
        let Formula::Globally(body) = formula else {
            return Ok(LawShape::Unsupported);
        };
        if let Formula::Implies(cond, next) = body.as_ref() {
            if let Formula::Next(act) = next.as_ref() {
                if !cond.is_temporal() && !act.is_temporal() {
                    require_kind(cond, PropKind::Observation, "state condition")?;
                    require_kind(act, PropKind::Action, "action condition")?;
                    let permitted = act.one_hot_models(num_actions)?;
                    if permitted.is_empty() {
                        return Err(LtlError::UnsatisfiableAction(act.to_string()));
                    }
                    return Ok(LawShape::ShieldForm {
                        cond: (**cond).clone(),
                        act: (**act).clone(),
                        permitted,
                    });
                }
            }
        }
        if !body.is_temporal() {
            require_kind(body, PropKind::Observation, "state invariant")?;
            return Ok(LawShape::StateInvariant { cond: (**body).clone() });
        }
        Ok(LawShape::Unsupported)
    }
}

fn require_kind(f: &Formula, kind: PropKind, part: &'static str) -> Result<(), LtlError> {
    match f.atoms().into_iter().find(|a| a.kind != kind) {
        Some(a) => Err(LtlError::MixedAtoms {
            part,
            expected: kind_label(kind),
            found: a.name.clone(),
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Law {
    pub id: String,
    pub formula: Formula,
    pub shape: LawShape,
    pub source: LawSource,
    pub explanation: String,
    pub created_round: u32,
}

impl Law {
    pub fn new(
        id: impl Into<String>,
        formula: Formula,
        source: LawSource,
        explanation: impl Into<String>,
        vocab: &Vocabulary,
    ) -> Result<Law, LtlError> {
        let id = id.into();
        if !valid_law_id(&id) {
            return Err(LtlError::InvalidId(id));
        }
        let shape = LawShape::classify(&formula, vocab.num_actions())?;
        Ok(Law {
            id,
            formula,
            shape,
            source,
            explanation: explanation.into(),
            created_round: 0,
        })
    }

    /// Parses law text into a law with the given id and source.
    pub fn parse(id: &str, text: &str, source: LawSource, vocab: &Vocabulary) -> Result<Law, LtlError> {
        Law::new(id, parse_formula(text, vocab)?, source, "", vocab)
    }

    pub fn with_round(mut self, round: u32) -> Self {
        self.created_round = round;
        self
    }

    pub fn is_hard(&self) -> bool {
        self.source == LawSource::HardSafety
    }

    /// Canonical text of the formula.
    pub fn text(&self) -> String {
        self.formula.to_string()
    }

    /// True when this law forbids `action` in `state`.
    pub fn blocks(&self, state: &AbstractState, action: usize) -> bool {
        match &self.shape {
            LawShape::ShieldForm { cond, permitted, .. } => {
                !permitted.contains(action) && cond.eval_state(state).unwrap_or(false)
            }
            _ => false,
        }
    }
}

/// Parses a bare law (`G(...)`) into an anonymous law.
pub fn parse_law(source: &str, vocab: &Vocabulary) -> Result<Law, LtlError> {
    Law::new("law", parse_formula(source, vocab)?, LawSource::HardSafety, "", vocab)
}

/// Canonical law text; reparsing yields a structurally equal formula.
pub fn print_law(law: &Law) -> String {
    law.text()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceVerdict {
    Satisfied,
    /// 1-based index of the first violating step.
    Violated(usize),
}

/// Finite-trace monitoring of a law over `(state, executed action)` steps.
///
/// Steps without an executed action only contribute their state.
pub fn eval_trace<'a, I>(law: &Law, steps: I) -> Result<TraceVerdict, LtlError>
where
    I: IntoIterator<Item = (&'a AbstractState, Option<ActionVector>)>,
{
    match &law.shape {
        LawShape::ShieldForm { cond, act, .. } => {
            for (i, (state, action)) in steps.into_iter().enumerate() {
                let Some(action) = action else { continue };
                if cond.eval_state(state)? && !act.eval_action(action)? {
                    return Ok(TraceVerdict::Violated(i + 1));
                }
            }
            Ok(TraceVerdict::Satisfied)
        }
        LawShape::StateInvariant { cond } => {
            for (i, (state, _)) in steps.into_iter().enumerate() {
                if !cond.eval_state(state)? {
                    return Ok(TraceVerdict::Violated(i + 1));
                }
            }
            Ok(TraceVerdict::Satisfied)
        }
        LawShape::Unsupported => Err(LtlError::UnsupportedShape(law.text())),
    }
}

/// Reads a law file: `ID ; SOURCE ; LAW ; EXPLANATION` per line.
pub fn parse_law_file(text: &str, vocab: &Vocabulary) -> Result<Vec<Law>, LtlError> {
    let mut laws = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, ';').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(LtlError::LawFile {
                line: line_no,
                message: "expected `ID ; SOURCE ; LAW ; EXPLANATION`".into(),
            });
        }
        let wrap = |source| LtlError::LawFileEntry {
            line: line_no,
            source: Box::new(source),
        };
        let source: LawSource = fields[1].parse().map_err(wrap)?;
        let formula = parse_formula(fields[2], vocab).map_err(wrap)?;
        let explanation = fields.get(3).copied().unwrap_or("");
        laws.push(Law::new(fields[0], formula, source, explanation, vocab).map_err(wrap)?);
    }
    Ok(laws)
}

/// Writes laws in the law-file format, canonical formula text.
pub fn write_law_file(laws: &[Law]) -> String {
    let mut out = String::from("# ID ; SOURCE ; LAW ; EXPLANATION\n");
    for law in laws {
        out.push_str(&format!(
            "{} ; {} ; {} ; {}\n",
            law.id,
            law.source,
            law.text(),
            law.explanation.replace('\n', " ")
        ));
    }
    out
}
