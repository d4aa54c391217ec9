//! Recursive-descent parser for the law language.
//!
//! ```text
//! formula := implies
//! implies := or ( "->" implies )?
//! or      := and ( "|" and )*
//! and     := until ( "&" until )*
//! until   := unary ( "U" unary )*
//! unary   := "!" unary | ("X" | "G" | "F") unary | primary
//! primary := "(" formula ")" | "true" | "false" | IDENT
//! ```
//!
//! Whitespace is insignificant. Identifiers are resolved against the
//! vocabulary (aliases included) and stored under their canonical name.

use super::{Atom, Formula, LtlError};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Not,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok<'_>)>, LtlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'!' => {
                out.push((i, Tok::Not));
                i += 1;
            }
            b'&' => {
                out.push((i, Tok::And));
                i += 1;
            }
            b'|' => {
                out.push((i, Tok::Or));
                i += 1;
            }
            b'(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((i, Tok::Arrow));
                i += 2;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(&src[start..i])));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(LtlError::Syntax {
                    position: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'s, 'v> {
    toks: Vec<(usize, Tok<'s>)>,
    pos: usize,
    end: usize,
    vocab: &'v Vocabulary,
}

impl<'s> Parser<'s, '_> {
    fn peek(&self) -> Option<&Tok<'s>> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LtlError> {
        Err(LtlError::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn eat(&mut self, tok: &Tok<'_>) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implies(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.implies()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::And) {
            let rhs = self.until()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Ident("U")) {
            let rhs = self.unary()?;
            lhs = Formula::Until(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some(Tok::Ident(op @ ("X" | "G" | "F"))) => {
                let op = *op;
                self.pos += 1;
                let inner = Box::new(self.unary()?);
                Ok(match op {
                    "X" => Formula::Next(inner),
                    "G" => Formula::Globally(inner),
                    _ => Formula::Finally(inner),
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, LtlError> {
        let position = self.offset();
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.implies()?;
                if !self.eat(&Tok::RParen) {
                    return self.error("expected `)`");
                }
                Ok(inner)
            }
            Some(Tok::Ident("true")) => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident("false")) => {
                self.pos += 1;
                Ok(Formula::False)
            }
            Some(Tok::Ident("U")) => self.error("`U` needs a left operand"),
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let (kind, index) = self.vocab.lookup(name).ok_or_else(|| LtlError::UnknownProposition {
                    name: name.to_string(),
                    position,
                })?;
                Ok(Formula::Atom(Atom {
                    kind,
                    index,
                    name: self.vocab.name(kind, index).to_string(),
                }))
            }
            Some(tok) => self.error(format!("unexpected token {tok:?}")),
            None => self.error("unexpected end of input"),
        }
    }
}

/// Parses a formula (temporal operators allowed) against `vocab`.
pub fn parse_formula(src: &str, vocab: &Vocabulary) -> Result<Formula, LtlError> {
    let mut parser = Parser {
        toks: lex(src)?,
        pos: 0,
        end: src.len(),
        vocab,
    };
    let formula = parser.implies()?;
    if parser.pos != parser.toks.len() {
        return parser.error("trailing input");
    }
    Ok(formula)
}

/// Checks that `name` is a well-formed law identifier.
pub(crate) fn valid_law_id(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
}
