//! Small infix parser for coefficient expressions such as
//! `z*f*(qs - 2)` or `qbar*q^-1`. Symbols resolve through a caller table.

use super::coeff::CoeffElem;
use super::field::parse_rational;
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character {0:?} at {1}")]
    BadChar(char, usize),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
    #[error("unexpected end of expression")]
    Eof,
    #[error("trailing input at {0}")]
    Trailing(usize),
    #[error("cannot divide by {0}: not a single-term element")]
    NotInvertible(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Id(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            out.push((st, Tok::Num(cs[st..i].iter().collect())));
        } else if c.is_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push((st, Tok::Id(cs[st..i].iter().collect())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ExprError::BadChar(c, i));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    syms: &'a BTreeMap<String, CoeffElem>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }
    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }
    fn expr(&mut self) -> Result<CoeffElem, ExprError> {
        let mut acc = self.term()?;
        while let Some(Tok::Op(c)) = self.peek() {
            let c = *c;
            if c != '+' && c != '-' {
                break;
            }
            self.pos += 1;
            let t = self.term()?;
            acc = if c == '+' { acc.plus(&t) } else { acc.minus(&t) };
        }
        Ok(acc)
    }
    fn term(&mut self) -> Result<CoeffElem, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    acc = acc.times(&self.unary()?);
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    let d = self.unary()?;
                    let inv = invert(&d)?;
                    acc = acc.times(&inv);
                }
                // juxtaposition binds like '*'
                Some(Tok::Id(_)) | Some(Tok::Num(_)) | Some(Tok::Op('(')) => {
                    acc = acc.times(&self.unary()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }
    fn unary(&mut self) -> Result<CoeffElem, ExprError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(self.unary()?.negate());
        }
        self.power()
    }
    fn power(&mut self) -> Result<CoeffElem, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let neg = if let Some(Tok::Op('-')) = self.peek() {
                self.pos += 1;
                true
            } else {
                false
            };
            let e: u32 = match self.next() {
                Some(Tok::Num(n)) => n.parse().map_err(|_| ExprError::Eof)?,
                _ => return Err(ExprError::Eof),
            };
            let p = base.pow(e);
            return if neg { invert(&p) } else { Ok(p) };
        }
        Ok(base)
    }
    fn atom(&mut self) -> Result<CoeffElem, ExprError> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(CoeffElem::from_rational(parse_rational(&n).unwrap())),
            Some(Tok::Id(s)) => self
                .syms
                .get(&s)
                .cloned()
                .ok_or(ExprError::UnknownSymbol(s)),
            Some(Tok::Op('(')) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::Op(')')) => Ok(e),
                    _ => Err(ExprError::Eof),
                }
            }
            _ => Err(ExprError::Eof),
        }
    }
}

fn invert(d: &CoeffElem) -> Result<CoeffElem, ExprError> {
    if let Some(inv) = d.inverse() {
        return Ok(inv);
    }
    if let Some(f) = d.as_birat() {
        if !crate::exactalg::Field::is_zero(&f) {
            return Ok(CoeffElem::from_birat(crate::exactalg::Field::recip(&f)));
        }
    }
    Err(ExprError::NotInvertible(d.render()))
}

/// Parses `s` with the given symbol table; the empty string parses as 0.
pub fn parse_coeff(s: &str, syms: &BTreeMap<String, CoeffElem>) -> Result<CoeffElem, ExprError> {
    let toks = lex(s)?;
    if toks.is_empty() {
        return Ok(CoeffElem::zero());
    }
    let mut p = Parser { toks, pos: 0, syms };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(ExprError::Trailing(p.toks[p.pos].0));
    }
    Ok(e)
}

/// Symbol table for the canonical variables z, q1, q2, u.
pub fn base_symbols() -> BTreeMap<String, CoeffElem> {
    let mut m = BTreeMap::new();
    m.insert("z".into(), CoeffElem::z());
    m.insert("q1".into(), CoeffElem::q1());
    m.insert("q2".into(), CoeffElem::q2());
    m.insert("u".into(), CoeffElem::u());
    m
}
