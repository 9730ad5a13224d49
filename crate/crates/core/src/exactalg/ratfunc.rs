use super::field::{Field, Rational};
use super::poly::Poly;
use std::collections::BTreeMap;

/// Reduced univariate rational function over `F`.
/// Invariant: gcd(num, den) = 1, den monic, and den = 1 when num = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RatFunc<F: Field> {
    num: Poly<F>,
    den: Poly<F>,
}

/// Rational functions in q₁ over ℚ.
pub type RatFuncQ1 = RatFunc<Rational>;

impl<F: Field> RatFunc<F> {
    pub fn new(num: Poly<F>, den: Poly<F>) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Self::from_poly(Poly::zero());
        }
        if den.is_constant() {
            let inv = den.lc().recip();
            return RatFunc {
                num: num.scale(&inv),
                den: Poly::one(),
            };
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = if g.is_constant() {
            (num, den)
        } else {
            (num.divrem(&g).0, den.divrem(&g).0)
        };
        let l = d.lc();
        if !l.is_one() {
            let inv = l.recip();
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        RatFunc { num: n, den: d }
    }
    pub fn from_poly(p: Poly<F>) -> Self {
        RatFunc {
            num: p,
            den: Poly::one(),
        }
    }
    pub fn constant(a: F) -> Self {
        Self::from_poly(Poly::constant(a))
    }
    pub fn x() -> Self {
        Self::from_poly(Poly::x())
    }
    /// x^k for any integer k.
    pub fn x_pow(k: i64) -> Self {
        if k >= 0 {
            Self::from_poly(Poly::monomial(F::one(), k as usize))
        } else {
            RatFunc {
                num: Poly::one(),
                den: Poly::monomial(F::one(), (-k) as usize),
            }
        }
    }
    pub fn num(&self) -> &Poly<F> {
        &self.num
    }
    pub fn den(&self) -> &Poly<F> {
        &self.den
    }
    pub fn is_poly(&self) -> bool {
        self.den.is_constant()
    }
    /// Value of a constant function.
    pub fn as_constant(&self) -> Option<F> {
        if self.num.is_constant() && self.den.is_constant() {
            Some(self.num.coeff(0))
        } else {
            None
        }
    }
    pub fn scale(&self, a: &F) -> Self {
        if a.is_zero() {
            return Self::from_poly(Poly::zero());
        }
        RatFunc {
            num: self.num.scale(a),
            den: self.den.clone(),
        }
    }
    pub fn pow(&self, e: i64) -> Self {
        let base = if e < 0 { self.recip() } else { self.clone() };
        let mut r = Self::one();
        for _ in 0..e.unsigned_abs() {
            r = r.times(&base);
        }
        r
    }

    /// d/dx with respect to this function's own variable.
    pub fn derivative(&self) -> Self {
        let n = self
            .num
            .derivative()
            .times(&self.den)
            .minus(&self.num.times(&self.den.derivative()));
        Self::new(n, self.den.times(&self.den))
    }

    /// Applies a derivation `dc` of the coefficient field coefficientwise.
    pub fn coeff_derivation(&self, dc: &impl Fn(&F) -> F) -> Self {
        let dn = self.num.map_coeffs(dc);
        let dd = self.den.map_coeffs(dc);
        if dd.is_zero() {
            return Self::new(dn, self.den.clone());
        }
        let n = dn.times(&self.den).minus(&self.num.times(&dd));
        Self::new(n, self.den.times(&self.den))
    }

    /// Applies a field map to every coefficient, then renormalises.
    pub fn map_coeffs(&self, f: &impl Fn(&F) -> F) -> Self {
        Self::new(self.num.map_coeffs(f), self.den.map_coeffs(f))
    }

    /// Evaluation; None at a pole.
    pub fn eval(&self, x: &F) -> Option<F> {
        let d = self.den.eval(x);
        if d.is_zero() {
            None
        } else {
            Some(self.num.eval(x).over(&d))
        }
    }

    /// g(x) = f(1/x), in reduced form.
    pub fn substitute_inverse(&self) -> Self {
        let n = self.num.deg().max(0) as usize;
        let m = self.den.deg() as usize;
        // f(1/x) = x^{m-n} rev_n(num)/rev_m(den)
        let rn = self.num.reversed(n);
        let rd = self.den.reversed(m);
        if m >= n {
            Self::new(rn.shift(m - n), rd)
        } else {
            Self::new(rn, rd.shift(n - m))
        }
    }

    /// Quotient of num by den.
    pub fn polynomial_part(&self) -> Poly<F> {
        self.num.divrem(&self.den).0
    }

    /// Composition f(g) for a rational g.
    pub fn compose(&self, g: &Self) -> Self {
        let ev = |p: &Poly<F>| {
            let mut acc = Self::zero();
            for a in p.coeffs().iter().rev() {
                acc = acc.times(g).plus(&Self::constant(a.clone()));
            }
            acc
        };
        ev(&self.num).over(&ev(&self.den))
    }

    /// Laurent expansion at x = 0: returns (v, c) with f = Σ_k c[k] x^{v+k},
    /// exact for the first `n` coefficients.
    pub fn laurent_at_zero(&self, n: usize) -> (i64, Vec<F>) {
        if self.num.is_zero() {
            return (0, vec![F::zero(); n]);
        }
        let vn = self.num.valuation().unwrap();
        let vd = self.den.valuation().unwrap();
        let nn: Vec<F> = self.num.coeffs()[vn..].to_vec();
        let dd: Vec<F> = self.den.coeffs()[vd..].to_vec();
        let d0inv = dd[0].recip();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = nn.get(k).cloned().unwrap_or_else(F::zero);
            for j in 1..=k.min(dd.len() - 1) {
                acc = acc.minus(&dd[j].times(&out[k - j]));
            }
            out.push(acc.times(&d0inv));
        }
        (vn as i64 - vd as i64, out)
    }

    pub fn render(&self, vars: &[&str]) -> String {
        if self.den.is_constant() {
            return self.num.render(vars);
        }
        let n = self.num.render(vars);
        // a single u-term can still carry a compound q1 coefficient
        let n = if n.contains(' ') || n.starts_with('-') {
            format!("({n})")
        } else {
            n
        };
        format!("{n}/({})", self.den.render(vars))
    }
}

impl<F: Field> Field for RatFunc<F> {
    fn zero() -> Self {
        Self::from_poly(Poly::zero())
    }
    fn one() -> Self {
        Self::from_poly(Poly::one())
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
    fn is_one(&self) -> bool {
        self.den.is_constant() && self.num.is_constant() && self.num.lc().is_one()
    }
    fn plus(&self, o: &Self) -> Self {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return Self::new(self.num.plus(&o.num), self.den.clone());
        }
        Self::new(
            self.num.times(&o.den).plus(&o.num.times(&self.den)),
            self.den.times(&o.den),
        )
    }
    fn minus(&self, o: &Self) -> Self {
        self.plus(&o.negate())
    }
    fn times(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        if self.den.is_constant() && o.den.is_constant() {
            return Self::from_poly(self.num.times(&o.num));
        }
        Self::new(self.num.times(&o.num), self.den.times(&o.den))
    }
    fn negate(&self) -> Self {
        RatFunc {
            num: self.num.negate(),
            den: self.den.clone(),
        }
    }
    fn recip(&self) -> Self {
        assert!(!self.is_zero(), "division by zero rational function");
        Self::new(self.den.clone(), self.num.clone())
    }
    fn from_i64(n: i64) -> Self {
        Self::constant(F::from_i64(n))
    }
    fn render(&self, vars: &[&str]) -> String {
        RatFunc::render(self, vars)
    }
    fn is_compound(&self) -> bool {
        if !self.den.is_constant() {
            return true;
        }
        let terms = self.num.coeffs().iter().filter(|c| !c.is_zero()).count();
        terms > 1 || (terms == 1 && self.num.lc().is_compound())
    }
}

/// 𝕗(q) = q/(1 − (−1)^{r+1} q).
pub fn f_basic(r: u32) -> RatFuncQ1 {
    let s = if (r + 1) % 2 == 0 { 1 } else { -1 };
    RatFunc::new(
        Poly::x(),
        Poly::from_coeffs(vec![Rational::one(), Rational::from_i64(-s)]),
    )
}

/// Laurent expansion of f at x = e: f = Σ_k c[k] (x−e)^{v+k}.
pub fn laurent_at(f: &RatFuncQ1, e: &Rational, n: usize) -> (i64, Vec<Rational>) {
    let shift = Poly::from_coeffs(vec![e.clone(), Rational::one()]);
    f.compose(&RatFunc::from_poly(shift)).laurent_at_zero(n)
}

/// Principal part of f at x = e, as a rational function of x.
pub fn principal_part(f: &RatFuncQ1, e: &Rational) -> RatFuncQ1 {
    let (v, c) = laurent_at(f, e, 1 + f.den().deg().max(0) as usize);
    let mut acc = RatFuncQ1::zero();
    if v >= 0 {
        return acc;
    }
    let xe = RatFunc::from_poly(Poly::from_coeffs(vec![e.negate(), Rational::one()]));
    for (k, ck) in c.iter().enumerate() {
        let p = v + k as i64;
        if p >= 0 {
            break;
        }
        acc = acc.plus(&xe.pow(p).scale(ck));
    }
    acc
}

/// Regular value of f at x = e (constant Laurent coefficient).
pub fn regular_value(f: &RatFuncQ1, e: &Rational) -> Rational {
    let (v, c) = laurent_at(f, e, 1 + f.den().deg().max(0) as usize);
    if v > 0 {
        Rational::zero()
    } else {
        c[(-v) as usize].clone()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PartialFractionError {
    #[error("denominator has a root outside the supplied pole list")]
    UnlistedRoot,
}

/// Principal parts of f at each supplied pole; rejects f whose denominator
/// does not split over the list. Re-summation is checked before returning.
pub fn partial_fractions(
    f: &RatFuncQ1,
    poles: &[Rational],
) -> Result<BTreeMap<Rational, RatFuncQ1>, PartialFractionError> {
    let mut rest = f.den().clone();
    let mut out = BTreeMap::new();
    for e in poles {
        let lin = Poly::from_coeffs(vec![e.negate(), Rational::one()]);
        let mut mult = 0;
        loop {
            let (qq, r) = rest.divrem(&lin);
            if !r.is_zero() {
                break;
            }
            rest = qq;
            mult += 1;
        }
        if mult > 0 {
            out.insert(e.clone(), principal_part(f, e));
        }
    }
    if !rest.is_constant() {
        return Err(PartialFractionError::UnlistedRoot);
    }
    let mut sum = RatFunc::from_poly(f.polynomial_part());
    for p in out.values() {
        sum = sum.plus(p);
    }
    assert_eq!(&sum, f, "partial fraction resummation failed");
    Ok(out)
}
