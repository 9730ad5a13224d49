//! Directed Gamma products, the relative factor I^{X/S}_β, base J data and
//! the truncated hypergeometric modification I.

use crate::cohring::{CohClass, Dir, TotalAlgebra};
use crate::curveclasses::{intersections, lambda, CurveClass};
use crate::exactalg::{qi, Field, Rational};
use crate::geometry::{BaseKind, Geometry};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Σ_k z^k c_k with cohomology coefficients; finite by nilpotency.
#[derive(Clone, Debug, PartialEq)]
pub struct ZSeries {
    pub terms: BTreeMap<i32, CohClass>,
}

impl ZSeries {
    pub fn zero() -> Self {
        ZSeries { terms: BTreeMap::new() }
    }
    pub fn one(alg: &TotalAlgebra) -> Self {
        Self::monomial(0, alg.one())
    }
    pub fn monomial(k: i32, c: CohClass) -> Self {
        let mut s = Self::zero();
        s.add_term(k, &c);
        s
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn coeff(&self, k: i32, n: usize) -> CohClass {
        self.terms.get(&k).cloned().unwrap_or_else(|| CohClass::zero(n))
    }
    pub fn max_z(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }
    pub fn min_z(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }
    pub fn add_term(&mut self, k: i32, c: &CohClass) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(k).or_insert_with(|| CohClass::zero(c.len()));
        *e = e.plus(c);
        if e.is_zero() {
            self.terms.remove(&k);
        }
    }
    pub fn add_scaled(&mut self, o: &ZSeries, c: &Rational) {
        if c.is_zero() {
            return;
        }
        for (k, v) in &o.terms {
            self.add_term(*k, &v.scale(c));
        }
    }
    pub fn plus(&self, o: &ZSeries) -> ZSeries {
        let mut r = self.clone();
        r.add_scaled(o, &Rational::one());
        r
    }
    pub fn minus(&self, o: &ZSeries) -> ZSeries {
        let mut r = self.clone();
        r.add_scaled(o, &qi(-1));
        r
    }
    pub fn scale(&self, c: &Rational) -> ZSeries {
        let mut r = Self::zero();
        r.add_scaled(self, c);
        r
    }
    pub fn shift_z(&self, k: i32) -> ZSeries {
        ZSeries { terms: self.terms.iter().map(|(a, v)| (a + k, v.clone())).collect() }
    }
    pub fn mul(&self, alg: &TotalAlgebra, o: &ZSeries) -> ZSeries {
        let mut r = Self::zero();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                r.add_term(a + b, &alg.mul(x, y));
            }
        }
        r
    }
    /// Multiplication by a class, keeping z-powers.
    pub fn mul_class(&self, alg: &TotalAlgebra, c: &CohClass) -> ZSeries {
        let mut r = Self::zero();
        for (a, x) in &self.terms {
            r.add_term(*a, &alg.mul(x, c));
        }
        r
    }
    /// Human rendering Σ z^k (class) over the algebra's basis labels.
    pub fn render(&self, alg: &TotalAlgebra) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, c) in self.terms.iter().rev() {
            let mut cs = Vec::new();
            for (i, x) in c.0.iter().enumerate() {
                if !x.is_zero() {
                    cs.push(format!("{}*{}", x, alg.label(i)));
                }
            }
            parts.push(format!("z^{k}*({})", cs.join(" + ")));
        }
        parts.join(" + ")
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IfuncError {
    #[error("reciprocal of a pure nilpotent class (m = 0 in a denominator)")]
    PureNilpotent,
}

/// 1/(a + mz) for nilpotent a, expanded as Σ_k (−a)^k/(mz)^{k+1}.
pub fn reciprocal_linear(alg: &TotalAlgebra, a: &CohClass, m: i64) -> Result<ZSeries, IfuncError> {
    if m == 0 {
        return Err(IfuncError::PureNilpotent);
    }
    let mut out = ZSeries::zero();
    let mut pw = alg.one();
    let mut k = 0i32;
    let minv = Rational::one().over(&qi(m));
    let mut coef = minv.clone();
    while !pw.is_zero() {
        out.add_term(-(k + 1), &pw.scale(&coef));
        pw = alg.mul(&pw, &a.scale(&qi(-1)));
        coef = coef.times(&minv);
        k += 1;
    }
    Ok(out)
}

/// ∏_{m=1}^{s}(a + mz) inverted in the directed sense.
pub fn directed_product(alg: &TotalAlgebra, a: &CohClass, s: i64) -> ZSeries {
    let mut out = ZSeries::one(alg);
    if s >= 1 {
        for m in 1..=s {
            out = out.mul(alg, &reciprocal_linear(alg, a, m).expect("m ≥ 1"));
        }
    } else {
        for m in (s + 1)..=0 {
            let mut f = ZSeries::monomial(0, a.clone());
            f.add_term(1, &alg.one().scale(&qi(m)));
            out = out.mul(alg, &f);
        }
    }
    out
}

/// A_β B_β C_β (double bundle) or A_β (single bundle).
pub fn relative_factor(alg: &TotalAlgebra, geo: &Geometry, beta: &CurveClass) -> ZSeries {
    relative_factor_impl(alg, geo, beta, false)
}

/// As `relative_factor`, with the ξ-factor for d₂ ≥ 0 replaced by its
/// ξ-constant term 1/(d₂! z^{d₂}).
pub fn relative_factor_strip_xi(alg: &TotalAlgebra, geo: &Geometry, beta: &CurveClass) -> ZSeries {
    relative_factor_impl(alg, geo, beta, true)
}

fn relative_factor_impl(alg: &TotalAlgebra, geo: &Geometry, beta: &CurveClass, strip: bool) -> ZSeries {
    let it = intersections(geo, beta);
    let mut out = ZSeries::one(alg);
    for (i, &s) in it.a.iter().enumerate() {
        out = out.mul(alg, &directed_product(alg, &alg.a_class(i), s));
        if out.is_zero() {
            return out;
        }
    }
    if !geo.is_double() {
        return out;
    }
    for (i, &s) in it.b.iter().enumerate() {
        out = out.mul(alg, &directed_product(alg, &alg.b_class(i), s));
        if out.is_zero() {
            return out;
        }
    }
    if strip && it.xi >= 0 {
        let mut f = Rational::one();
        for m in 1..=it.xi {
            f = f.times(&qi(m));
        }
        out.scale(&Rational::one().over(&f)).shift_z(-(it.xi as i32))
    } else {
        out.mul(alg, &directed_product(alg, &alg.xi(), it.xi))
    }
}

/// J^S_{β_S} pulled back to H(X), with e^{t̄/z} kept symbolic.
#[derive(Clone, Debug)]
pub struct BaseJ {
    pub terms: BTreeMap<Vec<i64>, ZSeries>,
}

/// Point: J = 1. P¹: J_d = 1/∏_{m=1}^d (p + mz)².
pub fn builtin_base_j(alg: &TotalAlgebra, base: BaseKind, bs: i64) -> BaseJ {
    let mut terms = BTreeMap::new();
    match base {
        BaseKind::Point => {
            terms.insert(vec![], ZSeries::one(alg));
        }
        BaseKind::P1 => {
            let p = alg.dir_class(Dir::Base(0));
            for d in 0..=bs {
                let f = directed_product(alg, &p, d);
                terms.insert(vec![d], f.mul(alg, &f));
            }
        }
    }
    BaseJ { terms }
}

/// Box in lifted coordinates: 0 ≤ β_S ≤ bs, 0 ≤ d + μ^I ≤ dmax,
/// 0 ≤ d₂ + ν^I ≤ d2 (the last only for double bundles).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LiftedBox {
    pub bs: i64,
    pub d2: i64,
    pub dmax: i64,
}

/// Lifted exponents (s, e₁, e₂) of q^β = u^s q₁^{e₁} q₂^{e₂}.
pub fn lifted_coords(geo: &Geometry, beta: &CurveClass) -> (i64, i64, i64) {
    let s = beta.base_degree();
    (s, beta.d + geo.mu_i(&beta.beta_s), beta.d2 + geo.nu_i(&beta.beta_s))
}

/// Class of u^s q₁^{e₁} q₂^{e₂}; single base generator (or none).
pub fn class_of_lifted(geo: &Geometry, s: i64, e1: i64, e2: i64) -> CurveClass {
    let bsv: Vec<i64> = if geo.base.ngens() == 0 { vec![] } else { vec![s] };
    let mu = if s == 0 { 0 } else { geo.mu_i(&bsv) };
    let nu = if s == 0 { 0 } else { geo.nu_i(&bsv) };
    CurveClass::new(bsv, e1 - mu, e2 - nu)
}

impl LiftedBox {
    pub fn contains(&self, geo: &Geometry, beta: &CurveClass) -> bool {
        let (s, e1, e2) = lifted_coords(geo, beta);
        (0..=self.bs).contains(&s) && (0..=self.dmax).contains(&e1) && (0..=self.d2).contains(&e2)
    }
    pub fn classes(&self, geo: &Geometry) -> Vec<CurveClass> {
        let smax = if geo.base.ngens() == 0 { 0 } else { self.bs };
        let e2max = if geo.is_double() { self.d2 } else { 0 };
        let mut v = Vec::new();
        for s in 0..=smax {
            for e2 in 0..=e2max {
                for e1 in 0..=self.dmax {
                    v.push(class_of_lifted(geo, s, e1, e2));
                }
            }
        }
        v
    }
}

/// Truncated I = Σ_β q^β e^{D/z + D.β} I^{X/S}_β J^S_{β_S}; e^{D/z} symbolic.
#[derive(Clone, Debug)]
pub struct SeriesI {
    pub bx: LiftedBox,
    pub terms: BTreeMap<CurveClass, ZSeries>,
}

impl SeriesI {
    pub fn get(&self, beta: &CurveClass) -> Option<&ZSeries> {
        self.terms.get(beta)
    }
}

pub fn assemble_i(alg: &TotalAlgebra, geo: &Geometry, bx: LiftedBox) -> SeriesI {
    let bj = builtin_base_j(alg, geo.base, bx.bs);
    let classes = bx.classes(geo);
    let terms: BTreeMap<CurveClass, ZSeries> = classes
        .par_iter()
        .map(|b| {
            let rf = relative_factor(alg, geo, b);
            let j = &bj.terms[&b.beta_s];
            (b.clone(), rf.mul(alg, j))
        })
        .filter(|(_, v)| !v.is_zero())
        .collect();
    SeriesI { bx, terms }
}

/// Weight of the monomial q^β z^k T_ε: c₁(X).β + k + deg T_ε.
pub fn homogeneity_defect(alg: &TotalAlgebra, geo: &Geometry, beta: &CurveClass, s: &ZSeries) -> Vec<i64> {
    let c1s: i64 = match geo.base {
        BaseKind::Point => 0,
        BaseKind::P1 => 2 * beta.base_degree(),
    };
    let c1x = c1s + lambda(geo, beta);
    let mut bad = Vec::new();
    for (k, c) in &s.terms {
        for (i, x) in c.0.iter().enumerate() {
            if !x.is_zero() {
                let w = c1x + *k as i64 + alg.degree(i) as i64;
                if w != 0 {
                    bad.push(w);
                }
            }
        }
    }
    bad
}

/// Truncated power series in t = 1/z with rational coefficients, used for
/// the scalar specialisation of directed products (classes ↦ numbers).
#[derive(Clone, Debug, PartialEq)]
pub struct TSeries {
    /// lowest t-power
    pub val: i64,
    pub coeffs: Vec<Rational>,
}

impl TSeries {
    pub fn one(n: usize) -> Self {
        let mut c = vec![Rational::zero(); n];
        if n > 0 {
            c[0] = Rational::one();
        }
        TSeries { val: 0, coeffs: c }
    }
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub fn mul(&self, o: &TSeries) -> TSeries {
        let n = self.len().min(o.len());
        let mut c = vec![Rational::zero(); n];
        for (i, x) in self.coeffs.iter().enumerate().take(n) {
            if x.is_zero() {
                continue;
            }
            for (j, y) in o.coeffs.iter().enumerate().take(n - i) {
                c[i + j] = c[i + j].plus(&x.times(y));
            }
        }
        TSeries { val: self.val + o.val, coeffs: c }
    }
    /// Coefficient of t^k.
    pub fn at(&self, k: i64) -> Rational {
        let i = k - self.val;
        if i < 0 || i as usize >= self.len() {
            Rational::zero()
        } else {
            self.coeffs[i as usize].clone()
        }
    }
}

/// Directed product with the class specialised to the number a, as a
/// series in t = 1/z with n terms: (a + mz) = t⁻¹(m + a t).
pub fn scalar_directed_product(a: &Rational, s: i64, n: usize) -> TSeries {
    let mut out = TSeries::one(n);
    if s >= 1 {
        for m in 1..=s {
            // 1/(m + a t) = Σ_k (−a)^k t^k / m^{k+1}
            let minv = Rational::one().over(&qi(m));
            let mut c = Vec::with_capacity(n);
            let mut x = minv.clone();
            for _ in 0..n {
                c.push(x.clone());
                x = x.times(&a.negate()).times(&minv);
            }
            out = out.mul(&TSeries { val: 1, coeffs: c });
        }
    } else {
        for m in (s + 1)..=0 {
            let mut c = vec![Rational::zero(); n];
            if n > 0 {
                c[0] = qi(m);
            }
            if n > 1 {
                c[1] = a.clone();
            }
            out = out.mul(&TSeries { val: -1, coeffs: c });
        }
    }
    out
}
