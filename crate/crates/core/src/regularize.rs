//! Analytic continuation across the flop at fixed (β_S, d₂): harmonic numbers,
//! the fundamental rational function W, its Reg/Pri data at integer points,
//! and the first two partial Birkhoff factorization steps.
//!
//! Normalisation: at a class β = β_S + dℓ + d₂γ everything is divided by
//! A = z^{−λ−(r+1)} q^{β_S + d₂γ}, so the series at d is
//! W[r+1](d) = z^{r+1}Q(d)I_{dℓ} with the ξ-factor set to 1, and the "first
//! stable series" is its z⁰ level.

use crate::cohring::{apply_matrix, CohClass, TotalAlgebra};
use crate::curveclasses::{lambda, CurveClass};
use crate::exactalg::{f_basic, laurent_at, principal_part, qi, Field, Poly, RatFunc, RatFuncQ1, Rational};
use crate::geometry::Geometry;
use crate::ifunc::{relative_factor_strip_xi, scalar_directed_product, ZSeries};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RegularizeError {
    #[error("regularization needs a double bundle (a flop)")]
    NeedsDoubleBundle,
    #[error("second step needs −λ−(r+1) ≥ 1, got λ = {0}")]
    LambdaTooLarge(i64),
    #[error("second step is only set up for odd r")]
    EvenRank,
}

/// H_d^{(k)} = Σ_{j=1}^d j^{−k}, precomputed for 0 ≤ d ≤ max_d, 1 ≤ k ≤ max_k.
///
/// Only non-negative indices exist here: the negative-length regime enters
/// through the reflected index −μ_i − d − 1 ≥ 0.
#[derive(Clone, Debug)]
pub struct HarmonicCache {
    table: Vec<Vec<Rational>>,
}

impl HarmonicCache {
    pub fn new(max_d: i64, max_k: u32) -> Self {
        let max_d = max_d.max(0);
        let table = (1..=max_k.max(1))
            .map(|k| {
                let mut row = Vec::with_capacity(max_d as usize + 1);
                let mut acc = Rational::zero();
                row.push(acc.clone());
                for j in 1..=max_d {
                    acc = acc.plus(&qi(j).pow(k as i32).recip());
                    row.push(acc.clone());
                }
                row
            })
            .collect();
        HarmonicCache { table }
    }
    pub fn max_d(&self) -> i64 {
        self.table[0].len() as i64 - 1
    }
    pub fn max_k(&self) -> u32 {
        self.table.len() as u32
    }
    /// None for d < 0 or outside the table.
    pub fn get(&self, d: i64, k: u32) -> Option<&Rational> {
        if d < 0 || k == 0 {
            return None;
        }
        self.table.get(k as usize - 1)?.get(d as usize)
    }
}

/// Placement of the (−1)^d convention for even r.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignTwist {
    /// W(d) taken literally: a parity factor (−1)^d times a rational function.
    #[default]
    Off,
    /// (−1)^d absorbed, so W is rational. No effect for odd r.
    On,
}

/// W_{β_S,d₂}(x) = (−1)^{Σ(x−M′_i−1)} ∏_i (x−M′_i−1)!/(x+μ_i)!, M′_i = d₂+μ′_i.
#[derive(Clone, Debug, PartialEq)]
pub struct FundW {
    pub r: usize,
    pub mu: Vec<i64>,
    pub m_prime: Vec<i64>,
    /// W without its parity factor, reduced
    pub rat: RatFuncQ1,
    /// value(d) = (−1)^d rat(d); set only for even r with the twist off
    pub parity: bool,
    /// [−μ^I, d₂+μ′^I]
    pub unstable: (i64, i64),
}

fn lin(c: i64) -> Poly<Rational> {
    // x + c
    Poly::from_coeffs(vec![qi(c), Rational::one()])
}

fn sign(e: i64) -> Rational {
    if e.rem_euclid(2) == 0 {
        Rational::one()
    } else {
        qi(-1)
    }
}

fn factorial(n: i64) -> Rational {
    (1..=n).fold(Rational::one(), |a, j| a.times(&qi(j)))
}

pub fn fundamental_w(geo: &Geometry, beta_s: &[i64], d2: i64, twist: SignTwist) -> FundW {
    let r = geo.r;
    let mu = geo.mu(beta_s);
    let m_prime: Vec<i64> = geo.mu_p(beta_s).iter().map(|m| d2 + m).collect();
    let mut num = Poly::one();
    let mut den = Poly::one();
    for (&m, &mp) in mu.iter().zip(&m_prime) {
        if m >= -mp {
            // 1/∏_{j=−μ}^{M′}(x − j)
            for j in -m..=mp {
                den = den.times(&lin(-j));
            }
        } else {
            // ∏_{k=x+μ+1}^{x−M′−1} k
            for j in (m + 1)..=(-mp - 1) {
                num = num.times(&lin(j));
            }
        }
    }
    // (−1)^{Σ(x−M′_i−1)} = (−1)^{(r+1)x} (−1)^{Σ(M′_i+1)}
    let s0 = sign(m_prime.iter().map(|m| m + 1).sum());
    let rat = RatFunc::new(num, den).scale(&s0);
    FundW {
        r,
        parity: r % 2 == 0 && twist == SignTwist::Off,
        unstable: (-geo.mu_i(beta_s), d2 + geo.mu_p_i(beta_s)),
        mu,
        m_prime,
        rat,
    }
}

impl FundW {
    fn parity_sign(&self, d: i64) -> Rational {
        if self.parity {
            sign(d)
        } else {
            Rational::one()
        }
    }

    /// None at a pole.
    pub fn value(&self, d: i64) -> Option<Rational> {
        Some(self.rat.eval(&qi(d))?.times(&self.parity_sign(d)))
    }

    /// Direct product of factorials, with 1/n! = 0 for n < 0. None when some
    /// numerator factorial (d − M′_i − 1)! has negative argument.
    pub fn factorial_value(&self, d: i64) -> Option<Rational> {
        let mut v = Rational::one();
        let mut e = 0;
        for (&m, &mp) in self.mu.iter().zip(&self.m_prime) {
            let top = d - mp - 1;
            if top < 0 {
                return None;
            }
            if d + m < 0 {
                return Some(Rational::zero());
            }
            v = v.times(&factorial(top)).over(&factorial(d + m));
            e += top;
        }
        let twist = if self.r % 2 == 0 && !self.parity { sign(d) } else { Rational::one() };
        Some(v.times(&sign(e)).times(&twist))
    }

    pub fn is_stable(&self, d: i64) -> bool {
        d < self.unstable.0 || d > self.unstable.1
    }

    /// Integer poles with their orders.
    pub fn poles(&self) -> Vec<(i64, i64)> {
        (self.unstable.0..=self.unstable.1)
            .filter_map(|e| {
                let (v, _) = laurent_at(&self.rat, &qi(e), 1);
                (v < 0).then_some((e, -v))
            })
            .collect()
    }

    pub fn polynomial_part(&self) -> Poly<Rational> {
        self.rat.polynomial_part()
    }

    /// z-power k ↦ w_k(d) for r+1 ≥ k ≥ kmin, from the Laurent expansion at
    /// x = d with x − d = 1/z. Powers above the pole order are zero.
    pub fn expansion(&self, d: i64, kmin: i32) -> BTreeMap<i32, Rational> {
        let n = self.rat.den().deg().max(0) as usize + 2 + (-kmin).max(0) as usize;
        let (v, c) = laurent_at(&self.rat, &qi(d), n);
        let s = self.parity_sign(d);
        let mut out = BTreeMap::new();
        for k in kmin..=(self.r as i32 + 1) {
            let j = -(k as i64) - v;
            let x = if j < 0 { Rational::zero() } else { c[j as usize].clone() };
            out.insert(k, x.times(&s));
        }
        out
    }
}

/// Regular value and principal part of W at x = e; the parity factor, if
/// any, is evaluated at e.
pub fn reg_pri(w: &FundW, e: i64) -> (Rational, RatFuncQ1) {
    let (reg, pri) = reg_pri_of(&w.rat, e);
    let s = w.parity_sign(e);
    (reg.times(&s), pri.scale(&s))
}

/// Regular value and principal part of a rational function at an integer.
pub fn reg_pri_of(f: &RatFuncQ1, e: i64) -> (Rational, RatFuncQ1) {
    let (v, c) = laurent_at(f, &qi(e), 1 + f.den().deg().max(0) as usize);
    let reg = if v > 0 { Rational::zero() } else { c[(-v) as usize].clone() };
    (reg, principal_part(f, &qi(e)))
}

/// Defect of P(e) = Reg F(e) − Σ_{e_j≠e} Pri_{e_j}F(e), P = polynomial part.
pub fn lemma_defect(f: &RatFuncQ1, poles: &[i64], e: i64) -> Rational {
    let p = f.polynomial_part().eval(&qi(e));
    let mut rhs = reg_pri_of(f, e).0;
    for &ej in poles {
        if ej != e {
            let pri = reg_pri_of(f, ej).1;
            rhs = rhs.minus(&pri.eval(&qi(e)).expect("principal part is regular off its pole"));
        }
    }
    p.minus(&rhs)
}

/// Polynomial over ℚ in formal variables a_0..a_r, b_0..b_r (a's first in
/// the exponent vector). In a W-series the degree-n part carries z^{r+1−n}.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FreePoly {
    pub nv: usize,
    pub terms: BTreeMap<Vec<u32>, Rational>,
}

impl FreePoly {
    pub fn zero(nv: usize) -> Self {
        FreePoly { nv, terms: BTreeMap::new() }
    }
    pub fn constant(nv: usize, c: Rational) -> Self {
        let mut p = Self::zero(nv);
        p.add(vec![0; nv], c);
        p
    }
    pub fn var(nv: usize, i: usize) -> Self {
        let mut e = vec![0; nv];
        e[i] = 1;
        let mut p = Self::zero(nv);
        p.add(e, Rational::one());
        p
    }
    fn add(&mut self, e: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let x = self.terms.entry(e.clone()).or_insert_with(Rational::zero);
        *x = x.plus(&c);
        if x.is_zero() {
            self.terms.remove(&e);
        }
    }
    pub fn plus(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add(e.clone(), c.clone());
        }
        r
    }
    pub fn minus(&self, o: &Self) -> Self {
        self.plus(&o.scale(&qi(-1)))
    }
    pub fn scale(&self, c: &Rational) -> Self {
        let mut r = Self::zero(self.nv);
        for (e, x) in &self.terms {
            r.add(e.clone(), x.times(c));
        }
        r
    }
    pub fn mul_trunc(&self, o: &Self, maxdeg: u32) -> Self {
        let mut r = Self::zero(self.nv);
        for (e, x) in &self.terms {
            let de: u32 = e.iter().sum();
            for (f, y) in &o.terms {
                if de + f.iter().sum::<u32>() > maxdeg {
                    continue;
                }
                r.add(e.iter().zip(f).map(|(a, b)| a + b).collect(), x.times(y));
            }
        }
        r
    }
    /// Homogeneous part of total degree n.
    pub fn part(&self, n: u32) -> Self {
        FreePoly {
            nv: self.nv,
            terms: self.terms.iter().filter(|(e, _)| e.iter().sum::<u32>() == n).map(|(e, c)| (e.clone(), c.clone())).collect(),
        }
    }
    pub fn eval(&self, vals: &[Rational]) -> Rational {
        self.terms.iter().fold(Rational::zero(), |acc, (e, c)| {
            let m = e.iter().zip(vals).fold(c.clone(), |m, (&k, v)| m.times(&v.pow(k as i32)));
            acc.plus(&m)
        })
    }
    /// Image under a_i, b_i ↦ the given classes.
    pub fn to_class(&self, alg: &TotalAlgebra, vars: &[CohClass]) -> CohClass {
        let mut out = CohClass::zero(alg.rank());
        for (e, c) in &self.terms {
            let mut m = alg.one();
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = alg.mul(&m, &alg.pow(&vars[i], k));
                }
            }
            out.add_scaled(&m, c);
        }
        out
    }
    /// Quantization at an extremal class: each variable v ↦ v + z·shift_v.
    pub fn quantize(&self, alg: &TotalAlgebra, vars: &[CohClass], shifts: &[i64]) -> ZSeries {
        let maxe = self.terms.keys().flat_map(|e| e.iter().copied()).max().unwrap_or(0);
        let pows: Vec<Vec<ZSeries>> = vars
            .iter()
            .zip(shifts)
            .map(|(v, &s)| {
                let mut l = ZSeries::monomial(0, v.clone());
                l.add_term(1, &alg.one().scale(&qi(s)));
                let mut p = vec![ZSeries::one(alg)];
                for k in 0..maxe as usize {
                    let next = p[k].mul(alg, &l);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut out = ZSeries::zero();
        for (e, c) in &self.terms {
            let mut m = ZSeries::one(alg);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    m = m.mul(alg, &pows[i][k as usize]);
                }
            }
            out.add_scaled(&m, c);
        }
        out
    }
}

/// Formal directed factor: 1/∏_{j=1}^s(j + v) for s ≥ 0, ∏_{j=s+1}^0(j + v)
/// for s < 0, with v of degree one.
fn free_factor(nv: usize, var: usize, s: i64, maxdeg: u32) -> FreePoly {
    let mut out = FreePoly::constant(nv, Rational::one());
    if s >= 0 {
        for j in 1..=s {
            // 1/(j + v) = Σ_n (−v)^n / j^{n+1}
            let mut g = FreePoly::zero(nv);
            for n in 0..=maxdeg {
                let mut e = vec![0; nv];
                e[var] = n;
                g.add(e, sign(n as i64).over(&qi(j).pow(n as i32 + 1)));
            }
            out = out.mul_trunc(&g, maxdeg);
        }
    } else {
        for j in (s + 1)..=0 {
            let g = FreePoly::var(nv, var).plus(&FreePoly::constant(nv, qi(j)));
            out = out.mul_trunc(&g, maxdeg);
        }
    }
    out
}

/// z^{r+1}Q(d)I_{dℓ} in the formal ring up to degree maxdeg (so W_k for
/// k ≥ r+1−maxdeg).
pub fn w_free(geo: &Geometry, beta_s: &[i64], d2: i64, d: i64, maxdeg: u32) -> FreePoly {
    let r = geo.r;
    let nv = 2 * (r + 1);
    let mu = geo.mu(beta_s);
    let mup = geo.mu_p(beta_s);
    let mut out = FreePoly::constant(nv, Rational::one());
    for i in 0..=r {
        out = out.mul_trunc(&free_factor(nv, i, d + mu[i], maxdeg), maxdeg);
    }
    for i in 0..=r {
        out = out.mul_trunc(&free_factor(nv, r + 1 + i, d2 - d + mup[i], maxdeg), maxdeg);
    }
    out
}

fn exp_trunc(s: &FreePoly, maxdeg: u32) -> FreePoly {
    let mut out = FreePoly::constant(s.nv, Rational::one());
    let mut p = out.clone();
    for n in 1..=maxdeg {
        p = p.mul_trunc(s, maxdeg).scale(&qi(n as i64).recip());
        out = out.plus(&p);
    }
    out
}

/// The same series through index sets I = {d+μ_i < 0}, J = {d₂−d+μ′_i < 0},
/// factorial prefactors and an exponential of harmonic sums.
pub fn w_harmonic(geo: &Geometry, beta_s: &[i64], d2: i64, d: i64, maxdeg: u32, h: &HarmonicCache) -> FreePoly {
    let r = geo.r;
    let nv = 2 * (r + 1);
    let mu = geo.mu(beta_s);
    let mup = geo.mu_p(beta_s);
    let mut pref = Rational::one();
    let mut sgn = 0i64;
    let mut mono = vec![0u32; nv];
    let mut expo = FreePoly::zero(nv);
    // (variable index, length s): the harmonic index is s (s ≥ 0) or −s−1
    let lens = (0..=r).map(|i| (i, d + mu[i])).chain((0..=r).map(|i| (r + 1 + i, d2 - d + mup[i])));
    for (v, s) in lens {
        let (idx, reflected) = if s >= 0 { (s, false) } else { (-s - 1, true) };
        if reflected {
            mono[v] = 1;
            pref = pref.times(&factorial(idx));
            sgn += idx;
        } else {
            pref = pref.over(&factorial(idx));
        }
        for k in 1..=maxdeg {
            let hk = h.get(idx, k).expect("harmonic cache too small").clone();
            let c = if reflected { hk.negate() } else { hk.times(&sign(k as i64)) };
            let mut e = vec![0; nv];
            e[v] = k;
            let mut t = FreePoly::zero(nv);
            t.add(e, c.over(&qi(k as i64)));
            expo = expo.plus(&t);
        }
    }
    let nmono: u32 = mono.iter().sum();
    if nmono > maxdeg {
        return FreePoly::zero(nv);
    }
    let mut lead = FreePoly::zero(nv);
    lead.add(mono, pref.times(&sign(sgn)));
    lead.mul_trunc(&exp_trunc(&expo, maxdeg - nmono), maxdeg)
}

/// Values a_i ↦ 1, b_i ↦ −1.
pub fn specialization(r: usize) -> Vec<Rational> {
    (0..2 * (r + 1)).map(|i| if i <= r { Rational::one() } else { qi(-1) }).collect()
}

/// w_k(d) against W_k(d)|_{a=1,b=−1} for r+1 ≥ k ≥ kmin.
#[derive(Clone, Debug, PartialEq)]
pub struct CompatReport {
    pub d: i64,
    /// Laurent coefficients of W at x = d
    pub laurent: BTreeMap<i32, Rational>,
    /// through the scalar directed products of the I-function
    pub specialized: BTreeMap<i32, Rational>,
    /// through the formal ring
    pub formal: BTreeMap<i32, Rational>,
    /// Θ_{r+1}|_{b=−1} = (−1)^{r+1}
    pub theta_sign: Rational,
}

impl CompatReport {
    /// k where W_k|_{a=1,b=−1} ≠ Θ|_{b=−1}·w_k, or the two routes disagree.
    pub fn mismatches(&self) -> Vec<i32> {
        self.laurent
            .iter()
            .filter(|(k, w)| {
                let s = &self.specialized[*k];
                *s != w.times(&self.theta_sign) || *s != self.formal[*k]
            })
            .map(|(k, _)| *k)
            .collect()
    }
}

pub fn series_compatibility(
    geo: &Geometry,
    beta_s: &[i64],
    d2: i64,
    d: i64,
    kmin: i32,
    twist: SignTwist,
) -> Result<CompatReport, RegularizeError> {
    if !geo.is_double() {
        return Err(RegularizeError::NeedsDoubleBundle);
    }
    let r = geo.r;
    let w = fundamental_w(geo, beta_s, d2, twist);
    let laurent = w.expansion(d, kmin);
    let mu = geo.mu(beta_s);
    let mup = geo.mu_p(beta_s);
    // ∏ directed products = z^{−(λ−d₂)} Q I; coefficient of t^j sits at
    // z^{r+1+λ−d₂−j} in W[r+1]
    let top = r as i64 + 1 + mu.iter().sum::<i64>() + mup.iter().sum::<i64>() + (r as i64 + 1) * d2;
    let n = (r as i64 + 2 - kmin as i64).max(1) as usize;
    let mut prod = scalar_directed_product(&Rational::one(), 0, n);
    for i in 0..=r {
        prod = prod.mul(&scalar_directed_product(&Rational::one(), d + mu[i], n));
        prod = prod.mul(&scalar_directed_product(&qi(-1), d2 - d + mup[i], n));
    }
    let specialized = (kmin..=r as i32 + 1).map(|k| (k, prod.at(top - k as i64))).collect();
    let maxdeg = (r as i32 + 1 - kmin) as u32;
    let f = w_free(geo, beta_s, d2, d, maxdeg);
    let vals = specialization(r);
    let formal = (kmin..=r as i32 + 1).map(|k| (k, f.part((r as i32 + 1 - k) as u32).eval(&vals))).collect();
    Ok(CompatReport { d, laurent, specialized, formal, theta_sign: sign(r as i64 + 1) })
}

/// Lagrange interpolation through exact points.
pub fn interpolate(points: &[(i64, Rational)]) -> Poly<Rational> {
    let mut out = Poly::zero();
    for (i, (xi, yi)) in points.iter().enumerate() {
        let mut basis = Poly::constant(yi.clone());
        for (j, (xj, _)) in points.iter().enumerate() {
            if i != j {
                basis = basis.times(&lin(-xj)).scale(&qi(xi - xj).recip());
            }
        }
        out = out.plus(&basis);
    }
    out
}

/// Interpolates on the first `need` points and checks all the rest.
fn polynomial_through(vals: &BTreeMap<i64, Option<Rational>>, need: usize) -> Option<Poly<Rational>> {
    let pts: Vec<(i64, Rational)> = vals.iter().map(|(d, v)| Some((*d, v.clone()?))).collect::<Option<_>>()?;
    if pts.len() < need + 1 {
        return None;
    }
    let p = interpolate(&pts[..need]);
    pts.iter().all(|(d, v)| p.eval(&qi(*d)) == *v).then_some(p)
}

/// θ = q d/dq; P(θ)f.
pub fn theta_apply(p: &Poly<Rational>, f: &RatFuncQ1) -> RatFuncQ1 {
    let mut out = RatFuncQ1::zero();
    let mut g = f.clone();
    for c in p.coeffs() {
        out = out.plus(&g.scale(c));
        g = RatFuncQ1::x().times(&g.derivative());
    }
    out
}

fn eps_pow(r: usize, k: i64) -> Rational {
    // ε = (−1)^{r+1}
    if r % 2 == 1 {
        Rational::one()
    } else {
        sign(k)
    }
}

/// Σ_{d ≥ d0} ε^{d−1}P(d)q^d in closed form via 𝕗, ε = (−1)^{r+1}.
pub fn tail_sum(p: &Poly<Rational>, d0: i64, r: usize) -> RatFuncQ1 {
    let mut base = f_basic(r as u32);
    for d in d0.min(1)..1 {
        base = base.plus(&RatFuncQ1::x_pow(d).scale(&eps_pow(r, d - 1)));
    }
    for d in 1..d0.max(1) {
        base = base.minus(&RatFuncQ1::x_pow(d).scale(&eps_pow(r, d - 1)));
    }
    theta_apply(p, &base)
}

/// P(θ)E(q) = 0 with E = 𝕗(q) + ε + 𝕗(1/q), each piece differentiated as a
/// rational function of q.
pub fn euler_identity(p: &Poly<Rational>, r: usize) -> bool {
    let f = f_basic(r as u32);
    let lhs = theta_apply(p, &f)
        .plus(&theta_apply(p, &f.substitute_inverse()))
        .plus(&RatFuncQ1::constant(p.eval(&Rational::zero()).times(&eps_pow(r, -1))));
    lhs.is_zero()
}

/// One side (X or X′) of the partial factorization at fixed (β_S, d₂).
struct Side {
    geo: Geometry,
    alg: TotalAlgebra,
    beta_s: Vec<i64>,
    d2: i64,
    lambda: i64,
    vars: Vec<CohClass>,
    w: FundW,
    ext: Vec<ZSeries>,
    wcache: BTreeMap<i64, FreePoly>,
}

impl Side {
    fn new(geo: &Geometry, beta_s: &[i64], d2: i64, twist: SignTwist) -> Self {
        let alg = TotalAlgebra::new(geo);
        let vars = (0..=geo.r).map(|i| alg.a_class(i)).chain((0..=geo.r).map(|i| alg.b_class(i))).collect();
        Side {
            lambda: lambda(geo, &CurveClass::new(beta_s.to_vec(), 0, d2)),
            w: fundamental_w(geo, beta_s, d2, twist),
            geo: geo.clone(),
            alg,
            beta_s: beta_s.to_vec(),
            d2,
            vars,
            ext: Vec::new(),
            wcache: BTreeMap::new(),
        }
    }
    fn r(&self) -> usize {
        self.geo.r
    }
    fn n(&self) -> usize {
        self.alg.rank()
    }
    fn theta(&self) -> CohClass {
        (0..=self.r()).fold(self.alg.one(), |m, i| self.alg.mul(&m, &self.alg.b_class(i)))
    }
    /// W[r+1](d) in H(X) from the I-function.
    fn w_series(&self, d: i64) -> ZSeries {
        let b = CurveClass::new(self.beta_s.clone(), d, self.d2);
        relative_factor_strip_xi(&self.alg, &self.geo, &b)
            .scale(&factorial(self.d2))
            .shift_z((self.lambda + self.r() as i64 + 1) as i32)
    }
    fn w_formal(&mut self, d: i64) -> FreePoly {
        let (geo, bs, d2, r) = (&self.geo, &self.beta_s, self.d2, self.r());
        self.wcache.entry(d).or_insert_with(|| w_free(geo, bs, d2, d, r as u32 + 1)).clone()
    }
    /// I_{mℓ}, m ≥ 0.
    fn extremal(&mut self, m: i64) -> ZSeries {
        while self.ext.len() as i64 <= m {
            let b = CurveClass::new(vec![0; self.beta_s.len()], self.ext.len() as i64, 0);
            let s = relative_factor_strip_xi(&self.alg, &self.geo, &b);
            self.ext.push(s);
        }
        self.ext[m as usize].clone()
    }
    fn shifts(&self, m: i64) -> Vec<i64> {
        (0..=self.r()).map(|_| m).chain((0..=self.r()).map(|_| -m)).collect()
    }
    fn quant(&self, p: &FreePoly, m: i64) -> ZSeries {
        p.quantize(&self.alg, &self.vars, &self.shifts(m))
    }
    /// Θ̂ = ∏(b_j + z b_j.β″) − (−1)^{r+1}∏(a_j + z a_j.β″) at β″ = mℓ.
    fn theta_hat(&self, m: i64) -> ZSeries {
        let nv = self.vars.len();
        let r = self.r();
        let mut pb = FreePoly::constant(nv, Rational::one());
        let mut pa = pb.clone();
        for i in 0..=r {
            pa = pa.mul_trunc(&FreePoly::var(nv, i), u32::MAX);
            pb = pb.mul_trunc(&FreePoly::var(nv, r + 1 + i), u32::MAX);
        }
        self.quant(&pb.minus(&pa.scale(&sign(r as i64 + 1))), m)
    }
    fn prod_a(&self) -> FreePoly {
        let nv = self.vars.len();
        (0..=self.r()).fold(FreePoly::constant(nv, Rational::one()), |m, i| m.mul_trunc(&FreePoly::var(nv, i), u32::MAX))
    }
    fn unstable(&self) -> std::ops::RangeInclusive<i64> {
        self.w.unstable.0..=self.w.unstable.1
    }
    /// P₁(z)I at class d, normalised.
    fn p1(&mut self, d: i64) -> ZSeries {
        let r = self.r() as u32;
        let mut out = self.w_series(d);
        for e in self.unstable().filter(|&e| e <= d) {
            let m = d - e;
            let wf = self.w_formal(e);
            let f = self.extremal(m);
            for k in 1..=r + 1 {
                let q = self.quant(&wf.part(r + 1 - k), m).shift_z(k as i32);
                out = out.minus(&q.mul(&self.alg, &f));
            }
        }
        out
    }
}

fn positive_part_zero(s: &ZSeries) -> bool {
    s.terms.keys().all(|&k| k <= 0)
}

/// c with a = cΘ, if any.
fn ratio_to(a: &CohClass, theta: &CohClass) -> Option<Rational> {
    let j = theta.0.iter().position(|x| !x.is_zero())?;
    let c = a.0[j].over(&theta.0[j]);
    (theta.scale(&c) == *a).then_some(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bf1Report {
    pub lambda: i64,
    pub unstable: (i64, i64),
    /// d where P₁I keeps a positive z-power on X or X′
    pub positive_z: Vec<i64>,
    /// z⁰ level of P₁I on the stable range as a multiple of Θ
    pub stable_values: BTreeMap<i64, Option<Rational>>,
    /// interpolated through the stable values and checked on all of them
    pub polynomial: Option<Poly<Rational>>,
    pub polynomial_part: Poly<Rational>,
    /// number of unstable poles × max pole order
    pub degree_bound: i64,
    /// z⁰ level of 𝒯P₁I^X − P₁′I^{X′} as a multiple of Θ′, over the full window
    pub flop_values: BTreeMap<i64, Option<Rational>>,
    pub flop_polynomial: Option<Poly<Rational>>,
    /// d where the 𝒯-difference has a positive z-power
    pub flop_positive_z: Vec<i64>,
    /// unstable d violating 𝒯W₀(d) − W′₀(d) = (−1)^r Reg W(d) Θ′
    pub top_defect_failures: Vec<i64>,
    /// the same against the opposite global sign (−1)^{r+1}
    pub top_defect_opposite_sign_failures: Vec<i64>,
    /// P(θ)E = 0 for the 𝒯-difference polynomial
    pub euler_identity: bool,
}

impl Bf1Report {
    pub fn stable_polynomiality(&self) -> bool {
        self.polynomial.as_ref().is_some_and(|p| *p == self.polynomial_part)
    }
    /// deg P ≤ #poles × max order. Not a theorem: deg P = deg num − deg den of
    /// W, which can exceed it (β_S = 2 on the (1,−4)/(0,0) flop).
    pub fn degree_within_bound(&self) -> bool {
        self.polynomial_part.deg() <= self.degree_bound
    }
    pub fn pass(&self) -> bool {
        self.positive_z.is_empty()
            && self.stable_polynomiality()
            && self.flop_polynomial.is_some()
            && self.flop_positive_z.is_empty()
            && self.top_defect_failures.is_empty()
            && self.euler_identity
    }
}

/// First partial factorization P₁ on d ∈ [−μ^I − extra, d₂ + μ′^I + extra];
/// `extra` is raised to the pole-degree bound + 2 so interpolation is checked.
pub fn partial_bf1(
    geo: &Geometry,
    beta_s: &[i64],
    d2: i64,
    extra: i64,
    twist: SignTwist,
) -> Result<Bf1Report, RegularizeError> {
    if !geo.is_double() {
        return Err(RegularizeError::NeedsDoubleBundle);
    }
    let r = geo.r;
    let mut x = Side::new(geo, beta_s, d2, twist);
    let mut xp = Side::new(&geo.mirror(), beta_s, d2, twist);
    let phi = x.alg.flop_matrix(&xp.alg);
    let (lo, hi) = x.w.unstable;
    let poles = x.w.poles();
    let degree_bound = poles.len() as i64 * poles.iter().map(|p| p.1).max().unwrap_or(0);
    let pdeg = x.w.polynomial_part().deg().max(0);
    let extra = extra.max(degree_bound.max(pdeg) + 2);
    let theta = x.theta();
    let theta_p = xp.theta();
    let n = x.n();

    let mut positive_z = Vec::new();
    let mut stable_values = BTreeMap::new();
    let mut flop_values = BTreeMap::new();
    let mut flop_positive_z = Vec::new();
    for d in (lo - extra)..=(hi + extra) {
        let a = x.p1(d);
        let b = xp.p1(d2 - d);
        if !positive_part_zero(&a) || !positive_part_zero(&b) {
            positive_z.push(d);
        }
        if d > hi {
            stable_values.insert(d, ratio_to(&a.coeff(0, n), &theta));
        }
        let ta = ZSeries { terms: a.terms.iter().map(|(k, c)| (*k, apply_matrix(&phi, c))).collect() };
        let diff = ta.minus(&b);
        if diff.terms.keys().any(|&k| k > 0) {
            flop_positive_z.push(d);
        }
        flop_values.insert(d, ratio_to(&diff.coeff(0, n), &theta_p));
    }
    let need = pdeg as usize + 1;
    let polynomial = polynomial_through(&stable_values, need);
    let flop_polynomial = polynomial_through(&flop_values, need);

    // with 𝒯 the graph correspondence and Θ′ = ∏b′_i the defect comes out
    // with the global sign (−1)^r
    let mut top_defect_failures = Vec::new();
    let mut top_defect_opposite_sign_failures = Vec::new();
    for d in lo..=hi {
        let w0 = apply_matrix(&phi, &x.w_series(d).coeff(0, n));
        let w0p = xp.w_series(d2 - d).coeff(0, n);
        let want = theta_p.scale(&reg_pri(&x.w, d).0.times(&sign(r as i64)));
        let diff = w0.minus(&w0p);
        if diff != want {
            top_defect_failures.push(d);
        }
        if diff != want.scale(&qi(-1)) {
            top_defect_opposite_sign_failures.push(d);
        }
    }
    let euler_identity = flop_polynomial.as_ref().is_some_and(|p| euler_identity(p, r));
    Ok(Bf1Report {
        lambda: x.lambda,
        unstable: (lo, hi),
        positive_z,
        stable_values,
        polynomial,
        polynomial_part: x.w.polynomial_part(),
        degree_bound,
        flop_values,
        flop_polynomial,
        flop_positive_z,
        top_defect_failures,
        top_defect_opposite_sign_failures,
        euler_identity,
    })
}

/// Presentation of Ŵ₀(d) used in the unstable Reg-part removal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum W0Quantization {
    /// W₀(d) − w₀(d)∏a_j: the ∏a_j term vanishes classically but makes the
    /// action on I_{mℓ}, m ≥ 1, start at z⁻¹, as for Θ̂
    Normalized,
    /// W₀(d) as it comes out of the formal expansion
    Naive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bf2Report {
    pub lambda: i64,
    pub unstable: (i64, i64),
    pub window: (i64, i64),
    pub polynomial: Poly<Rational>,
    /// d where P₂I keeps a non-zero z⁰ level or a positive power
    pub first_series_nonzero: Vec<i64>,
    /// z⁻¹ level of P₂I on the stable part of the window
    pub second_series: BTreeMap<i64, CohClass>,
    /// z⁻¹ level of P₁I alone (I and the unstable z^k removals), stable part
    pub second_series_p1: BTreeMap<i64, CohClass>,
    /// −(c₁+c′₁)Θ, the class multiplying P(d)H_{d−1}
    pub trouble_class: CohClass,
}

/// Second partial factorization P₂ on d ∈ [−μ^I, d₂ + μ′^I + extra].
pub fn partial_bf2(
    geo: &Geometry,
    beta_s: &[i64],
    d2: i64,
    extra: i64,
    quant: W0Quantization,
) -> Result<Bf2Report, RegularizeError> {
    if !geo.is_double() {
        return Err(RegularizeError::NeedsDoubleBundle);
    }
    let r = geo.r;
    if r % 2 == 0 {
        return Err(RegularizeError::EvenRank);
    }
    let mut x = Side::new(geo, beta_s, d2, SignTwist::Off);
    if -x.lambda - (r as i64 + 1) < 1 {
        return Err(RegularizeError::LambdaTooLarge(x.lambda));
    }
    let (lo, hi) = x.w.unstable;
    let n = x.n();
    let p = x.w.polynomial_part();
    let poles: Vec<i64> = x.w.poles().iter().map(|e| e.0).collect();
    let vals = specialization(r);
    let pa = x.prod_a();
    // Ŵ₀(d0) − Σ_{e<d0} Pri_e W(d0)·Θ̂, split as (formal W₀ part, Θ̂ coefficient)
    let mut unstable_ops = BTreeMap::new();
    for d0 in lo..=hi {
        let w0 = x.w_formal(d0).part(r as u32 + 1);
        let w0 = match quant {
            W0Quantization::Normalized => w0.minus(&pa.scale(&w0.eval(&vals))),
            W0Quantization::Naive => w0,
        };
        let mut c = Rational::zero();
        for &e in poles.iter().filter(|&&e| e < d0) {
            let pri = reg_pri(&x.w, e).1;
            c = c.plus(&pri.eval(&qi(d0)).expect("regular off the pole"));
        }
        unstable_ops.insert(d0, (w0, c));
    }
    let mut first_series_nonzero = Vec::new();
    let mut second_series = BTreeMap::new();
    let mut second_series_p1 = BTreeMap::new();
    for d in lo..=(hi + extra) {
        let mut out = x.p1(d);
        if d > hi {
            second_series_p1.insert(d, out.coeff(-1, n));
        }
        for d0 in lo..=d {
            let m = d - d0;
            let f = x.extremal(m);
            let op = if d0 > hi {
                x.theta_hat(m).scale(&p.eval(&qi(d0)))
            } else {
                let (w0, c) = &unstable_ops[&d0];
                x.quant(w0, m).minus(&x.theta_hat(m).scale(c))
            };
            out = out.minus(&op.mul(&x.alg, &f));
        }
        if out.terms.keys().any(|&k| k >= 0) {
            first_series_nonzero.push(d);
        }
        if d > hi {
            second_series.insert(d, out.coeff(-1, n));
        }
    }
    let c1: Vec<Rational> = (0..x.alg.base.rank)
        .map(|j| x.alg.l_classes.iter().chain(&x.alg.lp_classes).fold(Rational::zero(), |a, l| a.plus(&l[j])))
        .collect();
    let trouble_class = x.alg.mul(&x.alg.from_base(&c1), &x.theta()).scale(&qi(-1));
    Ok(Bf2Report {
        lambda: x.lambda,
        unstable: (lo, hi),
        window: (lo, hi + extra),
        polynomial: p,
        first_series_nonzero,
        second_series,
        second_series_p1,
        trouble_class,
    })
}

/// Whether the values admit N/D with deg N ≤ dn, deg D ≤ dd: fitted on the
/// first dn+dd+1 points, checked on the rest.
pub fn fits_rational(vals: &[(i64, Rational)], dn: usize, dd: usize) -> bool {
    let m = dn + dd + 2;
    let fit = m - 1;
    if vals.len() <= fit {
        return false;
    }
    let row = |d: i64, g: &Rational| -> Vec<Rational> {
        let x = qi(d);
        let mut v: Vec<Rational> = (0..=dn).map(|k| x.pow(k as i32)).collect();
        v.extend((0..=dd).map(|k| x.pow(k as i32).times(g).negate()));
        v
    };
    let rows: Vec<Vec<Rational>> = vals[..fit].iter().map(|(d, g)| row(*d, g)).collect();
    let Some(sol) = null_vector(rows, m) else { return false };
    vals[fit..].iter().all(|(d, g)| row(*d, g).iter().zip(&sol).fold(Rational::zero(), |a, (x, y)| a.plus(&x.times(y))).is_zero())
}

/// A non-zero kernel vector of an underdetermined system.
fn null_vector(mut a: Vec<Vec<Rational>>, m: usize) -> Option<Vec<Rational>> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..m {
        let Some(p) = (row..a.len()).find(|&i| !a[i][col].is_zero()) else { continue };
        a.swap(row, p);
        let inv = a[row][col].recip();
        a[row] = a[row].iter().map(|x| x.times(&inv)).collect();
        for i in 0..a.len() {
            if i != row && !a[i][col].is_zero() {
                let f = a[i][col].clone();
                let pr = a[row].clone();
                a[i] = a[i].iter().zip(&pr).map(|(x, y)| x.minus(&y.times(&f))).collect();
            }
        }
        pivots.push(col);
        row += 1;
        if row == a.len() {
            break;
        }
    }
    let free = (0..m).find(|c| !pivots.contains(c))?;
    let mut v = vec![Rational::zero(); m];
    v[free] = Rational::one();
    for (i, &pc) in pivots.iter().enumerate() {
        v[pc] = a[i][free].negate();
    }
    Some(v)
}

#[cfg(test)]
mod tests;
