use super::field::{Field, Rational};
use super::poly::Poly;
use super::ratfunc::{RatFunc, RatFuncQ1};
use std::collections::BTreeMap;

/// ℚ(q₁)(u): u is the lifted base Novikov monomial. Outer variable u,
/// coefficients rational in q₁.
pub type BiRat = RatFunc<RatFuncQ1>;

pub fn q1_birat() -> BiRat {
    BiRat::constant(RatFuncQ1::x())
}
pub fn u_birat() -> BiRat {
    BiRat::x()
}
pub fn rat_birat(c: Rational) -> BiRat {
    BiRat::constant(RatFuncQ1::constant(c))
}
pub fn q1rat_birat(c: RatFuncQ1) -> BiRat {
    BiRat::constant(c)
}

/// f(q₁, u) ↦ f(q₁, s·u) for s ∈ ℚ(q₁).
pub fn birat_scale_u(f: &BiRat, s: &RatFuncQ1) -> BiRat {
    if s.is_one() {
        return f.clone();
    }
    let sc = |p: &Poly<RatFuncQ1>| {
        let mut pw = RatFuncQ1::one();
        let mut c = Vec::new();
        for a in p.coeffs() {
            c.push(a.times(&pw));
            pw = pw.times(s);
        }
        Poly::from_coeffs(c)
    };
    BiRat::new(sc(f.num()), sc(f.den()))
}

/// q₁·∂/∂q₁ on ℚ(q₁)(u).
pub fn birat_q1_euler(f: &BiRat) -> BiRat {
    let x = RatFuncQ1::x();
    f.coeff_derivation(&|c: &RatFuncQ1| c.derivative().times(&x))
}

/// u·∂/∂u on ℚ(q₁)(u).
pub fn birat_u_euler(f: &BiRat) -> BiRat {
    f.derivative().times(&u_birat())
}

/// Weights of the three Novikov variables under one derivation direction:
/// ∂_a q₁ = w_q1·q₁, ∂_a q₂ = w_q2·q₂, ∂_a u = w_u·u.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct VarWeights {
    pub q1: i64,
    pub q2: i64,
    pub u: i64,
}

/// Coefficient of a connection matrix: finite sum of z^a q₂^b · f(q₁, u).
/// Invariant: no zero values stored.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CoeffElem {
    terms: BTreeMap<(i32, i32), BiRat>,
}

impl CoeffElem {
    pub fn zero() -> Self {
        CoeffElem::default()
    }
    pub fn one() -> Self {
        Self::from_birat(BiRat::one())
    }
    pub fn from_birat(f: BiRat) -> Self {
        Self::monomial(0, 0, f)
    }
    pub fn from_int(n: i64) -> Self {
        Self::from_birat(BiRat::from_i64(n))
    }
    pub fn from_rational(c: Rational) -> Self {
        Self::from_birat(rat_birat(c))
    }
    pub fn monomial(z: i32, q2: i32, f: BiRat) -> Self {
        let mut terms = BTreeMap::new();
        if !f.is_zero() {
            terms.insert((z, q2), f);
        }
        CoeffElem { terms }
    }
    pub fn z() -> Self {
        Self::monomial(1, 0, BiRat::one())
    }
    pub fn q2() -> Self {
        Self::monomial(0, 1, BiRat::one())
    }
    pub fn q1() -> Self {
        Self::from_birat(q1_birat())
    }
    pub fn u() -> Self {
        Self::from_birat(u_birat())
    }
    pub fn terms(&self) -> &BTreeMap<(i32, i32), BiRat> {
        &self.terms
    }
    pub fn into_terms(self) -> BTreeMap<(i32, i32), BiRat> {
        self.terms
    }
    pub fn from_terms(t: impl IntoIterator<Item = ((i32, i32), BiRat)>) -> Self {
        let mut c = CoeffElem::zero();
        for (k, v) in t {
            c.add_term(k, &v);
        }
        c
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms.get(&(0, 0)).map_or(false, |f| f.is_one())
    }
    /// The (z⁰, q₂⁰) component.
    pub fn constant_part(&self) -> BiRat {
        self.terms.get(&(0, 0)).cloned().unwrap_or_else(BiRat::zero)
    }
    /// Some(f) when this element lies in ℚ(q₁)(u).
    pub fn as_birat(&self) -> Option<BiRat> {
        match self.terms.len() {
            0 => Some(BiRat::zero()),
            1 => self.terms.get(&(0, 0)).cloned(),
            _ => None,
        }
    }
    pub fn max_z(&self) -> Option<i32> {
        self.terms.keys().map(|k| k.0).max()
    }
    pub fn min_z(&self) -> Option<i32> {
        self.terms.keys().map(|k| k.0).min()
    }

    fn add_term(&mut self, k: (i32, i32), v: &BiRat) {
        if v.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(e) => {
                *e = e.plus(v);
                if e.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, v.clone());
            }
        }
    }
    pub fn plus(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (k, v) in &o.terms {
            r.add_term(*k, v);
        }
        r
    }
    pub fn add_assign(&mut self, o: &Self) {
        for (k, v) in &o.terms {
            self.add_term(*k, v);
        }
    }
    pub fn negate(&self) -> Self {
        CoeffElem {
            terms: self.terms.iter().map(|(k, v)| (*k, v.negate())).collect(),
        }
    }
    pub fn minus(&self, o: &Self) -> Self {
        self.plus(&o.negate())
    }
    pub fn times(&self, o: &Self) -> Self {
        let mut r = CoeffElem::zero();
        for (ka, va) in &self.terms {
            for (kb, vb) in &o.terms {
                r.add_term((ka.0 + kb.0, ka.1 + kb.1), &va.times(vb));
            }
        }
        r
    }
    pub fn scale(&self, f: &BiRat) -> Self {
        if f.is_zero() {
            return CoeffElem::zero();
        }
        CoeffElem {
            terms: self.terms.iter().map(|(k, v)| (*k, v.times(f))).collect(),
        }
    }
    /// Multiplies by z^a q₂^b.
    pub fn shift(&self, z: i32, q2: i32) -> Self {
        CoeffElem {
            terms: self
                .terms
                .iter()
                .map(|(k, v)| ((k.0 + z, k.1 + q2), v.clone()))
                .collect(),
        }
    }
    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..e {
            r = r.times(self);
        }
        r
    }
    /// Inverse of a single-term element; None otherwise.
    pub fn inverse(&self) -> Option<Self> {
        if self.terms.len() != 1 {
            return None;
        }
        let (k, v) = self.terms.iter().next().unwrap();
        Some(Self::monomial(-k.0, -k.1, v.recip()))
    }

    /// The derivation ∂_a along a direction with the given variable weights.
    pub fn derive(&self, w: &VarWeights) -> Self {
        let mut r = CoeffElem::zero();
        for (k, v) in &self.terms {
            let mut d = BiRat::zero();
            let e = k.1 as i64 * w.q2;
            if e != 0 {
                d = d.plus(&v.times(&BiRat::from_i64(e)));
            }
            if w.q1 != 0 {
                d = d.plus(&birat_q1_euler(v).times(&BiRat::from_i64(w.q1)));
            }
            if w.u != 0 {
                d = d.plus(&birat_u_euler(v).times(&BiRat::from_i64(w.u)));
            }
            r.add_term(*k, &d);
        }
        r
    }

    /// Flop substitution q₁ ↦ 1/q₁, q₂ ↦ q₁q₂, u ↦ u·q₁^k.
    pub fn flop_substitute(&self, k: i64) -> Self {
        let s = RatFuncQ1::x_pow(k);
        let mut r = CoeffElem::zero();
        for (key, v) in &self.terms {
            let inv = v.map_coeffs(&|c: &RatFuncQ1| c.substitute_inverse());
            let sub = birat_scale_u(&inv, &s).times(&q1rat_birat(RatFuncQ1::x_pow(key.1 as i64)));
            r.add_term(*key, &sub);
        }
        r
    }

    /// Applies a map to every BiRat value.
    pub fn map_values(&self, f: impl Fn(&BiRat) -> BiRat) -> Self {
        CoeffElem::from_terms(self.terms.iter().map(|(k, v)| (*k, f(v))))
    }

    /// Expansion into monomials c·z^a q₂^b u^s q₁^e with s ≤ max_u and
    /// e ≤ max_q1 (lower exponents may be negative).
    pub fn expand(&self, max_u: i64, max_q1: i64) -> Vec<SeriesTerm> {
        let mut out = Vec::new();
        for (k, v) in &self.terms {
            for (s, c) in birat_u_series(v, max_u) {
                let (vq, _) = c.laurent_at_zero(0);
                let n = (max_q1 - vq + 1).max(0) as usize;
                let (vq, cq) = c.laurent_at_zero(n);
                for (i, a) in cq.into_iter().enumerate() {
                    if !Field::is_zero(&a) {
                        out.push(SeriesTerm {
                            z: k.0,
                            q2: k.1 as i64,
                            u: s,
                            q1: vq + i as i64,
                            c: a,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts: Vec<String> = Vec::new();
        for (k, v) in self.terms.iter().rev() {
            let mono = mono_key(k.0, k.1);
            let s = v.render(&["q1", "u"]);
            let p = if mono.is_empty() {
                s
            } else if v.is_one() {
                mono
            } else if v.negate().is_one() {
                format!("-{mono}")
            } else if v.is_compound() {
                format!("({s})*{mono}")
            } else {
                format!("{s}*{mono}")
            };
            parts.push(p);
        }
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            if let Some(rest) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
        out
    }

    /// JSON object keyed by "z^a*q2^b" (lexicographic string order, the
    /// serde_json default) with values rendered over q1 and u.
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (k, v) in &self.terms {
            m.insert(format!("z^{}*q2^{}", k.0, k.1), v.render(&["q1", "u"]).into());
        }
        serde_json::Value::Object(m)
    }
}

/// One monomial of an expanded coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTerm {
    pub z: i32,
    pub q2: i64,
    pub u: i64,
    pub q1: i64,
    pub c: Rational,
}

/// u-adic expansion with exact ℚ(q₁) coefficients, up to u^max_u.
pub fn birat_u_series(f: &BiRat, max_u: i64) -> Vec<(i64, RatFuncQ1)> {
    if f.is_zero() {
        return Vec::new();
    }
    let (v, _) = f.laurent_at_zero(0);
    let n = (max_u - v + 1).max(0) as usize;
    let (v, c) = f.laurent_at_zero(n);
    c.into_iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .map(|(i, a)| (v + i as i64, a))
        .collect()
}

fn mono_key(z: i32, q2: i32) -> String {
    let mut s = Vec::new();
    match z {
        0 => {}
        1 => s.push("z".to_string()),
        _ => s.push(format!("z^{z}")),
    }
    match q2 {
        0 => {}
        1 => s.push("q2".to_string()),
        _ => s.push(format!("q2^{q2}")),
    }
    s.join("*")
}
