//! Checked-in expectations for the two worked examples, written in the
//! abbreviations 𝕗, 𝕘, A, S, q*, q̄, and an entrywise comparator.

use crate::cohring::Dir;
use crate::exactalg::{base_symbols, parse_coeff, CoeffElem, ExprError};
use crate::lerayhirsch::CMatrix;
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Clone, Debug, Deserialize)]
pub struct GoldenInvariant {
    pub label: String,
    pub matrix: String,
    /// 1-based, as printed.
    pub row: usize,
    pub col: usize,
    pub value: String,
}

#[derive(Clone, Debug, Deserialize)]
pub struct GoldenSet {
    pub name: String,
    /// Abbreviation definitions, each in terms of z, q1, q2, u and earlier ones.
    pub symbols: Vec<(String, String)>,
    pub basis: Vec<String>,
    /// Connection matrix key to direction name (h, xi, p).
    pub directions: BTreeMap<String, String>,
    pub matrices: BTreeMap<String, Vec<Vec<String>>>,
    pub invariants: Vec<GoldenInvariant>,
}

#[derive(Debug, thiserror::Error)]
pub enum GoldenError {
    #[error("no golden matrix {0:?}")]
    Missing(String),
    #[error("golden {matrix}[{row}][{col}]: {err}")]
    Parse { matrix: String, row: usize, col: usize, err: ExprError },
    #[error("symbol {0}: {1}")]
    Symbol(String, ExprError),
    #[error("shape mismatch for {0}: expected {1}x{1}")]
    Shape(String, usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub matrix: String,
    pub row: usize,
    pub col: usize,
    pub expected: String,
    pub got: String,
}

const HIRZEBRUCH: &str = include_str!("../golden/hirzebruch.json");
const P1FLOP_00_01: &str = include_str!("../golden/p1flop_00_01.json");

pub fn builtin(name: &str) -> Option<GoldenSet> {
    let src = match name {
        "hirzebruch" => HIRZEBRUCH,
        "p1flop_00_01" => P1FLOP_00_01,
        _ => return None,
    };
    Some(GoldenSet::from_json(src).expect("builtin golden file parses"))
}

pub fn dir_of(name: &str) -> Option<Dir> {
    match name {
        "h" => Some(Dir::H),
        "xi" => Some(Dir::Xi),
        "p" => Some(Dir::Base(0)),
        _ => None,
    }
}

impl GoldenSet {
    pub fn from_json(s: &str) -> Result<GoldenSet, GoldenError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn symbol_table(&self) -> Result<BTreeMap<String, CoeffElem>, GoldenError> {
        let mut t = base_symbols();
        for (k, v) in &self.symbols {
            let e = parse_coeff(v, &t).map_err(|e| GoldenError::Symbol(k.clone(), e))?;
            t.insert(k.clone(), e);
        }
        Ok(t)
    }

    pub fn parse(&self, s: &str) -> Result<CoeffElem, ExprError> {
        let t = self.symbol_table().map_err(|_| ExprError::Eof)?;
        parse_coeff(s, &t)
    }

    /// Connection matrix keys paired with their directions, in file order.
    pub fn connection_keys(&self) -> Vec<(String, Dir)> {
        self.directions.iter().filter_map(|(k, d)| dir_of(d).map(|d| (k.clone(), d))).collect()
    }

    pub fn matrix(&self, key: &str) -> Result<CMatrix, GoldenError> {
        let raw = self.matrices.get(key).ok_or_else(|| GoldenError::Missing(key.into()))?;
        let t = self.symbol_table()?;
        let n = self.basis.len();
        if raw.len() != n || raw.iter().any(|r| r.len() != n) {
            return Err(GoldenError::Shape(key.into(), n));
        }
        raw.iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, s)| {
                        parse_coeff(s, &t).map_err(|err| GoldenError::Parse { matrix: key.into(), row: i + 1, col: j + 1, err })
                    })
                    .collect()
            })
            .collect()
    }

    /// Every entry where `got` differs from the checked-in value.
    pub fn compare(&self, key: &str, got: &CMatrix) -> Result<Vec<Mismatch>, GoldenError> {
        let want = self.matrix(key)?;
        if got.len() != want.len() || got.iter().any(|r| r.len() != want.len()) {
            return Err(GoldenError::Shape(key.into(), want.len()));
        }
        let mut out = Vec::new();
        for (i, (wr, gr)) in want.iter().zip(got).enumerate() {
            for (j, (w, g)) in wr.iter().zip(gr).enumerate() {
                if w != g {
                    out.push(Mismatch {
                        matrix: key.into(),
                        row: i + 1,
                        col: j + 1,
                        expected: self.matrices[key][i][j].clone(),
                        got: g.render(),
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn entry_count(&self, key: &str) -> usize {
        self.matrices.get(key).map_or(0, |m| m.iter().map(|r| r.len()).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lerayhirsch::assemble_connection;
    use crate::scenario::{LiftChoice, Scenario};

    #[test]
    fn builtin_files_parse() {
        for n in ["hirzebruch", "p1flop_00_01"] {
            let g = builtin(n).unwrap();
            for k in g.matrices.keys() {
                g.matrix(k).unwrap();
            }
        }
    }

    #[test]
    fn abbreviations_resolve() {
        let g = builtin("p1flop_00_01").unwrap();
        assert_eq!(g.parse("f").unwrap(), g.parse("q1/(1-q1)").unwrap());
        assert_eq!(g.parse("A + S").unwrap(), g.parse("2*q2").unwrap());
        assert_eq!(g.parse("qs*(1+g)").unwrap(), g.parse("g").unwrap());
    }

    #[test]
    fn connection_matches_both_examples() {
        for (sc, lift) in [(Scenario::hirzebruch(), LiftChoice::Iminimal), (Scenario::p1flop_00_01(), LiftChoice::Twisted)] {
            let g = builtin(&sc.name).unwrap();
            let conn = assemble_connection(&sc.geometry, lift).unwrap();
            for (k, d) in g.connection_keys() {
                let bad = g.compare(&k, conn.matrix(d)).unwrap();
                assert!(bad.is_empty(), "{}: {:?}", sc.name, bad);
            }
        }
    }

    #[test]
    fn comparator_reports_a_changed_entry() {
        let sc = Scenario::hirzebruch();
        let g = builtin("hirzebruch").unwrap();
        let mut m = assemble_connection(&sc.geometry, LiftChoice::Iminimal).unwrap().matrix(Dir::H).clone();
        m[1][3] = CoeffElem::zero();
        let bad = g.compare("C_h", &m).unwrap();
        assert_eq!(bad.len(), 1);
        assert_eq!((bad[0].row, bad[0].col), (2, 4));
    }
}
