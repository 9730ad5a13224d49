//! Validated flop data: fiber dimension, base, and bundle splitting degrees.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Point,
    P1,
}

impl BaseKind {
    /// Number of base curve generators (and of base divisor generators).
    pub fn ngens(self) -> usize {
        match self {
            BaseKind::Point => 0,
            BaseKind::P1 => 1,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("r must be at least 1")]
    BadR,
    #[error("{field}: expected {expected} entries, found {found}")]
    Length {
        field: String,
        expected: usize,
        found: usize,
    },
}

/// Bundle data (S, F, F′) of a split local flop, or of a single projective
/// bundle P(F) → S when `fp_degrees` is None.
///
/// `f_degrees[i][g]` is c₁(L_i)·C_g for base curve generator C_g.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub r: usize,
    pub base: BaseKind,
    pub f_degrees: Vec<Vec<i64>>,
    pub fp_degrees: Option<Vec<Vec<i64>>>,
}

impl Geometry {
    pub fn new(
        r: usize,
        base: BaseKind,
        f_degrees: Vec<Vec<i64>>,
        fp_degrees: Option<Vec<Vec<i64>>>,
    ) -> Result<Self, GeometryError> {
        let g = Geometry {
            r,
            base,
            f_degrees,
            fp_degrees,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.r < 1 {
            return Err(GeometryError::BadR);
        }
        let n = self.base.ngens();
        let check = |name: &str, v: &Vec<Vec<i64>>| -> Result<(), GeometryError> {
            if v.len() != self.r + 1 {
                return Err(GeometryError::Length {
                    field: name.to_string(),
                    expected: self.r + 1,
                    found: v.len(),
                });
            }
            for (i, row) in v.iter().enumerate() {
                if row.len() != n {
                    return Err(GeometryError::Length {
                        field: format!("{name}[{i}]"),
                        expected: n,
                        found: row.len(),
                    });
                }
            }
            Ok(())
        };
        check("f_degrees", &self.f_degrees)?;
        if let Some(fp) = &self.fp_degrees {
            check("fp_degrees", fp)?;
        }
        Ok(())
    }

    pub fn is_double(&self) -> bool {
        self.fp_degrees.is_some()
    }

    /// The flopped side: F and F′ exchanged. Panics for a single bundle.
    pub fn mirror(&self) -> Geometry {
        Geometry {
            r: self.r,
            base: self.base,
            f_degrees: self.fp_degrees.clone().expect("mirror needs F′"),
            fp_degrees: Some(self.f_degrees.clone()),
        }
    }

    /// μ_i = β_S·L_i.
    pub fn mu(&self, beta_s: &[i64]) -> Vec<i64> {
        pair_rows(&self.f_degrees, beta_s)
    }

    /// μ′_i = β_S·L′_i (zeros for a single bundle).
    pub fn mu_p(&self, beta_s: &[i64]) -> Vec<i64> {
        match &self.fp_degrees {
            Some(fp) => pair_rows(fp, beta_s),
            None => vec![0; self.r + 1],
        }
    }

    pub fn mu_i(&self, beta_s: &[i64]) -> i64 {
        *self.mu(beta_s).iter().max().unwrap()
    }

    pub fn mu_p_i(&self, beta_s: &[i64]) -> i64 {
        *self.mu_p(beta_s).iter().max().unwrap()
    }

    /// ν^I = max(μ^I + μ′^I, 0); zero for a single bundle.
    pub fn nu_i(&self, beta_s: &[i64]) -> i64 {
        if !self.is_double() {
            return 0;
        }
        (self.mu_i(beta_s) + self.mu_p_i(beta_s)).max(0)
    }

    /// Degree of L_i (or L′_i) as a vector over base divisor generators.
    /// For the built-in bases the curve/divisor pairing is the identity.
    pub fn line_class(&self, primed: bool, i: usize) -> Vec<i64> {
        if primed {
            self.fp_degrees.as_ref().map(|v| v[i].clone()).unwrap_or_else(|| vec![0; self.base.ngens()])
        } else {
            self.f_degrees[i].clone()
        }
    }

    /// Unit vector of base generator 0 (the only one for the built-ins).
    pub fn base_generator(&self) -> Vec<i64> {
        let mut v = vec![0; self.base.ngens()];
        if !v.is_empty() {
            v[0] = 1;
        }
        v
    }
}

fn pair_rows(rows: &[Vec<i64>], beta_s: &[i64]) -> Vec<i64> {
    rows.iter()
        .map(|row| row.iter().zip(beta_s).map(|(a, b)| a * b).sum())
        .collect()
}
