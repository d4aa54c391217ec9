//! Canonical printer. Parentheses are emitted only where precedence or
//! associativity requires them, so printing then parsing is the identity
//! on the AST.

use std::fmt;

use super::Formula;

const IMPLIES: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const UNTIL: u8 = 4;
const UNARY: u8 = 5;

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => IMPLIES,
        Formula::Or(..) => OR,
        Formula::And(..) => AND,
        Formula::Until(..) => UNTIL,
        _ => UNARY,
    }
}

pub(super) fn write_formula(out: &mut fmt::Formatter<'_>, f: &Formula) -> fmt::Result {
    write_at(out, f, 0)
}

fn write_at(out: &mut fmt::Formatter<'_>, f: &Formula, min: u8) -> fmt::Result {
    let own = precedence(f);
    let wrap = own < min;
    if wrap {
        out.write_str("(")?;
    }
    match f {
        Formula::True => out.write_str("true")?,
        Formula::False => out.write_str("false")?,
        Formula::Atom(a) => out.write_str(&a.name)?,
        Formula::Not(inner) => {
            out.write_str("!")?;
            write_at(out, inner, UNARY)?;
        }
        Formula::Next(inner) => temporal(out, "X", inner)?,
        Formula::Globally(inner) => temporal(out, "G", inner)?,
        Formula::Finally(inner) => temporal(out, "F", inner)?,
        // left-associative
        Formula::And(a, b) => binary(out, a, " & ", b, AND, AND + 1)?,
        Formula::Or(a, b) => binary(out, a, " | ", b, OR, OR + 1)?,
        Formula::Until(a, b) => binary(out, a, " U ", b, UNTIL, UNTIL + 1)?,
        // right-associative
        Formula::Implies(a, b) => binary(out, a, " -> ", b, IMPLIES + 1, IMPLIES)?,
    }
    if wrap {
        out.write_str(")")?;
    }
    Ok(())
}

fn temporal(out: &mut fmt::Formatter<'_>, op: &str, inner: &Formula) -> fmt::Result {
    out.write_str(op)?;
    out.write_str("(")?;
    write_at(out, inner, 0)?;
    out.write_str(")")
}

fn binary(
    out: &mut fmt::Formatter<'_>,
    lhs: &Formula,
    op: &str,
    rhs: &Formula,
    lhs_min: u8,
    rhs_min: u8,
) -> fmt::Result {
    write_at(out, lhs, lhs_min)?;
    out.write_str(op)?;
    write_at(out, rhs, rhs_min)
}

#[cfg(test)]
mod tests {
    use crate::ltl::parse_formula;
    use crate::vocab::Vocabulary;

    fn round(src: &str) -> String {
        parse_formula(src, &Vocabulary::minecraft()).unwrap().to_string()
    }

    #[test]
    fn redundant_parentheses_are_dropped() {
        assert_eq!(round("((obs_has_log))"), "obs_has_log");
        assert_eq!(
            round("(obs_has_log & obs_has_plank) & obs_has_fuel"),
            "obs_has_log & obs_has_plank & obs_has_fuel"
        );
    }

    #[test]
    fn required_parentheses_are_kept() {
        assert_eq!(
            round("obs_has_log & (obs_has_plank & obs_has_fuel)"),
            "obs_has_log & (obs_has_plank & obs_has_fuel)"
        );
        assert_eq!(
            round("!(obs_has_log | obs_has_plank)"),
            "!(obs_has_log | obs_has_plank)"
        );
        assert_eq!(
            round("(obs_has_log -> obs_has_plank) -> obs_has_fuel"),
            "(obs_has_log -> obs_has_plank) -> obs_has_fuel"
        );
    }

    #[test]
    fn shield_law_prints_in_canonical_form() {
        assert_eq!(
            round("G( !obs_has_log->X( !action_craft_planks ) )"),
            "G(!obs_has_log -> X(!action_craft_planks))"
        );
    }
}
