//! Bundled law sets.

use crate::ltl::{parse_law_file, Law, LtlError};
use crate::shield::LawSet;
use crate::vocab::Vocabulary;

pub const SAYCAN_HARD: &str = include_str!("../data/saycan_hard.laws");
pub const SAYCAN_SOFT: &str = include_str!("../data/saycan_soft.laws");
pub const INNER_MONOLOGUE: &str = include_str!("../data/innermonologue.laws");

/// Named fixture lookup, used by `bundled:` paths in configs.
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "saycan_hard" | "saycan_hard.laws" => Some(SAYCAN_HARD),
        "saycan_soft" | "saycan_soft.laws" => Some(SAYCAN_SOFT),
        "innermonologue" | "innermonologue.laws" => Some(INNER_MONOLOGUE),
        _ => None,
    }
}

fn load(text: &str, vocab: &Vocabulary) -> Vec<Law> {
    parse_law_file(text, vocab).expect("bundled law fixture parses")
}

pub fn saycan_hard(vocab: &Vocabulary) -> LawSet {
    LawSet::from_laws(load(SAYCAN_HARD, vocab)).expect("unique ids")
}

pub fn saycan_soft(vocab: &Vocabulary) -> LawSet {
    LawSet::from_laws(load(SAYCAN_SOFT, vocab)).expect("unique ids")
}

pub fn saycan_all(vocab: &Vocabulary) -> LawSet {
    let mut laws = load(SAYCAN_HARD, vocab);
    laws.extend(load(SAYCAN_SOFT, vocab));
    LawSet::from_laws(laws).expect("unique ids")
}

pub fn inner_monologue(vocab: &Vocabulary) -> LawSet {
    LawSet::from_laws(load(INNER_MONOLOGUE, vocab)).expect("unique ids")
}

/// Parses a fixture by name, surfacing parse errors instead of panicking.
pub fn try_load(name: &str, vocab: &Vocabulary) -> Option<Result<Vec<Law>, LtlError>> {
    by_name(name).map(|text| parse_law_file(text, vocab))
}
