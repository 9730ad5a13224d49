//! Text and JSON renderings of exact data.
//!
//! Matrix entries can be written in the abbreviations: 𝕗 = q1/(1−εq1)
//! with ε = (−1)^{r+1} as `f`, and 𝕘 = u/(1−u) as `g`. An entry is abbreviated
//! only when the rewrite is a polynomial in the abbreviation; anything else is
//! printed over q1 and u.

use qlh::cohring::{CohClass, TotalAlgebra};
use qlh::curveclasses::CurveClass;
use qlh::exactalg::{BiRat, CoeffElem, Field, Poly, RatFuncQ1, Rational};
use qlh::lerayhirsch::CMatrix;
use serde_json::{json, Value};
use std::collections::BTreeMap;

/// N/(x−ε)^k as a polynomial in y = x/(1−εx), when deg N ≤ k.
///
/// With x = y/(1+εy) and x−ε = −ε/(1+εy) the result is
/// (−ε)^k Σ nᵢ yⁱ(1+εy)^{k−i}.
pub fn in_abbrev_basis<F: Field>(num: &Poly<F>, den: &Poly<F>, eps: i64) -> Option<Poly<F>> {
    let lin = Poly::from_coeffs(vec![F::from_i64(-eps), F::one()]);
    let k = den.deg();
    if k < 1 || num.deg() > k || *den != lin.pow(k as u32) {
        return None;
    }
    let one_eps = Poly::from_coeffs(vec![F::one(), F::from_i64(eps)]);
    let mut out = Poly::zero();
    for (i, c) in num.coeffs().iter().enumerate() {
        let t = one_eps.pow((k - i as i64) as u32).shift(i).scale(c);
        out = out.plus(&t);
    }
    let sign = if eps == 1 && k % 2 == 1 { F::from_i64(-1) } else { F::one() };
    Some(out.scale(&sign))
}

fn sum_terms(terms: Vec<(String, String)>) -> String {
    // (coefficient, monomial); an empty monomial is 1
    let mut parts = Vec::new();
    for (c, m) in terms {
        let p = match (c.as_str(), m.is_empty()) {
            (_, true) => c.clone(),
            ("1", false) => m.clone(),
            ("-1", false) => format!("-{m}"),
            _ if compound(&c) => format!("({c})*{m}"),
            _ => format!("{c}*{m}"),
        };
        parts.push(p);
    }
    if parts.is_empty() {
        return "0".into();
    }
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        match p.strip_prefix('-') {
            Some(rest) => {
                out.push_str(" - ");
                out.push_str(rest);
            }
            None => {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
    }
    out
}

fn power(var: &str, k: usize) -> String {
    match k {
        0 => String::new(),
        1 => var.to_string(),
        _ => format!("{var}^{k}"),
    }
}

fn poly_with<F>(p: &Poly<F>, var: &str, coeff: impl Fn(&F) -> String) -> String
where
    F: Field,
{
    let terms = p
        .coeffs()
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (coeff(c), power(var, i)))
        .collect();
    sum_terms(terms)
}

/// Entry renderer for one rank r.
#[derive(Clone, Copy, Debug)]
pub struct Notation {
    pub r: usize,
    pub abbreviate: bool,
}

impl Notation {
    fn eps(&self) -> i64 {
        if self.r % 2 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn q1(&self, c: &RatFuncQ1) -> String {
        if self.abbreviate {
            if let Some(p) = in_abbrev_basis(c.num(), c.den(), self.eps()) {
                return poly_with(&p, "f", |a: &Rational| a.to_string());
            }
        }
        c.render(&["q1"])
    }

    pub fn birat(&self, v: &BiRat) -> String {
        if self.abbreviate {
            if v.den().is_constant() {
                let d = v.den().coeff(0);
                return poly_with(&v.num().map_coeffs(|c| c.over(&d)), "u", |c| self.q1(c));
            }
            if let Some(p) = in_abbrev_basis(v.num(), v.den(), 1) {
                return poly_with(&p, "g", |c| self.q1(c));
            }
        }
        v.render(&["q1", "u"])
    }

    pub fn coeff(&self, c: &CoeffElem) -> String {
        let terms = c
            .terms()
            .iter()
            .rev()
            .map(|(&(z, q2), v)| {
                let b = self.birat(v);
                let zp = match z {
                    0 => None,
                    1 => Some("z".to_string()),
                    _ => Some(format!("z^{z}")),
                };
                let qp = (q2 != 0).then(|| power("q2", q2 as usize));
                if zp.is_none() && qp.is_none() {
                    return (b, String::new());
                }
                // z leads, q₂ trails, the coefficient sits between
                let (sign, b) = match b.strip_prefix('-') {
                    Some(rest) if !compound(rest) => ("-", rest.to_string()),
                    _ => ("", b),
                };
                let mid = match b.as_str() {
                    "1" => None,
                    _ if compound(&b) => Some(format!("({b})")),
                    _ => Some(b),
                };
                let f: Vec<String> = zp.into_iter().chain(mid).chain(qp).collect();
                ("1".to_string(), format!("{sign}{}", f.join("*")))
            })
            .collect();
        sum_terms(terms)
    }
}

fn compound(s: &str) -> bool {
    s.contains(['+', ' ']) || s.get(1..).is_some_and(|t| t.contains('-'))
}

/// Rows of rendered entries.
pub fn matrix_strings(m: &CMatrix, nt: Notation) -> Vec<Vec<String>> {
    m.iter().map(|row| row.iter().map(|c| nt.coeff(c)).collect()).collect()
}

/// Right-aligned grid with basis labels on both axes; zero entries blank.
pub fn grid(title: &str, labels: &[String], cells: &[Vec<String>]) -> String {
    let shown: Vec<Vec<&str>> = cells.iter().map(|r| r.iter().map(|s| if s == "0" { "" } else { s.as_str() }).collect()).collect();
    let lw = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0);
    let cw: Vec<usize> = (0..labels.len())
        .map(|j| shown.iter().map(|r| r[j].chars().count()).chain([labels[j].chars().count()]).max().unwrap_or(0))
        .collect();
    let pad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w - s.chars().count()));
    let mut out = format!("{title}\n{}", " ".repeat(lw));
    for (j, l) in labels.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&pad(l, cw[j]));
    }
    out.push('\n');
    for (i, row) in shown.iter().enumerate() {
        out.push_str(&pad(&labels[i], lw));
        for (j, s) in row.iter().enumerate() {
            out.push_str("  ");
            out.push_str(&pad(s, cw[j]));
        }
        out.push('\n');
    }
    out
}

pub fn labels(alg: &TotalAlgebra) -> Vec<String> {
    (0..alg.rank()).map(|k| alg.label(k)).collect()
}

/// Nonzero components keyed by basis label.
pub fn class_json(alg: &TotalAlgebra, c: &CohClass) -> Value {
    let m: BTreeMap<String, String> =
        c.0.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(k, x)| (alg.label(k), x.to_string())).collect();
    json!(m)
}

pub fn class_text(alg: &TotalAlgebra, c: &CohClass) -> String {
    let terms = c
        .0
        .iter()
        .enumerate()
        .filter(|(_, x)| !x.is_zero())
        .map(|(k, x)| (x.to_string(), if k == 0 { String::new() } else { alg.label(k) }))
        .collect();
    sum_terms(terms)
}

pub fn vec_json(alg: &TotalAlgebra, v: &[Rational]) -> Value {
    class_json(alg, &CohClass(v.to_vec()))
}

/// "s,d,d2" with s the total base degree.
pub fn class_key(b: &CurveClass) -> String {
    format!("{},{},{}", b.base_degree(), b.d, b.d2)
}

pub fn lifted_key(c: &(i64, i64, i64)) -> String {
    format!("{},{},{}", c.0, c.1, c.2)
}
