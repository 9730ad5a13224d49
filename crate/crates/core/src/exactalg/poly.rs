use super::field::Field;

/// Dense univariate polynomial, coefficients from low to high degree.
/// Invariant: no trailing zero coefficient (the zero polynomial is empty).
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<F: Field> {
    c: Vec<F>,
}

impl<F: Field> Poly<F> {
    pub fn from_coeffs(mut c: Vec<F>) -> Self {
        while c.last().map_or(false, |x| x.is_zero()) {
            c.pop();
        }
        Poly { c }
    }
    pub fn zero() -> Self {
        Poly { c: Vec::new() }
    }
    pub fn one() -> Self {
        Self::constant(F::one())
    }
    pub fn constant(a: F) -> Self {
        Self::from_coeffs(vec![a])
    }
    /// a * x^k
    pub fn monomial(a: F, k: usize) -> Self {
        if a.is_zero() {
            return Self::zero();
        }
        let mut c = vec![F::zero(); k + 1];
        c[k] = a;
        Poly { c }
    }
    pub fn x() -> Self {
        Self::monomial(F::one(), 1)
    }
    pub fn coeffs(&self) -> &[F] {
        &self.c
    }
    pub fn coeff(&self, k: usize) -> F {
        self.c.get(k).cloned().unwrap_or_else(F::zero)
    }
    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }
    /// Degree, with -1 for the zero polynomial.
    pub fn deg(&self) -> i64 {
        self.c.len() as i64 - 1
    }
    pub fn is_constant(&self) -> bool {
        self.c.len() <= 1
    }
    pub fn lc(&self) -> F {
        self.c.last().cloned().unwrap_or_else(F::zero)
    }
    /// Lowest k with nonzero coefficient; None for zero.
    pub fn valuation(&self) -> Option<usize> {
        self.c.iter().position(|x| !x.is_zero())
    }

    pub fn plus(&self, o: &Self) -> Self {
        let n = self.c.len().max(o.c.len());
        let mut c = Vec::with_capacity(n);
        for i in 0..n {
            c.push(match (self.c.get(i), o.c.get(i)) {
                (Some(a), Some(b)) => a.plus(b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        Self::from_coeffs(c)
    }
    pub fn negate(&self) -> Self {
        Poly {
            c: self.c.iter().map(|a| a.negate()).collect(),
        }
    }
    pub fn minus(&self, o: &Self) -> Self {
        self.plus(&o.negate())
    }
    pub fn times(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut c = vec![F::zero(); self.c.len() + o.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.c.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                c[i + j] = c[i + j].plus(&a.times(b));
            }
        }
        Self::from_coeffs(c)
    }
    pub fn scale(&self, a: &F) -> Self {
        if a.is_zero() {
            return Self::zero();
        }
        Poly {
            c: self.c.iter().map(|x| x.times(a)).collect(),
        }
    }
    /// Multiplies by x^k.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = vec![F::zero(); k];
        c.extend(self.c.iter().cloned());
        Poly { c }
    }
    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..e {
            r = r.times(self);
        }
        r
    }
    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let l = self.lc();
        if l.is_one() {
            return self.clone();
        }
        self.scale(&l.recip())
    }

    /// Euclidean division; panics on zero divisor.
    pub fn divrem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "polynomial division by zero");
        if self.deg() < d.deg() {
            return (Self::zero(), self.clone());
        }
        let dl_inv = d.lc().recip();
        let dd = d.c.len() - 1;
        let mut r = self.c.clone();
        let mut quo = vec![F::zero(); self.c.len() - dd];
        for k in (0..quo.len()).rev() {
            let t = r[k + dd].times(&dl_inv);
            if t.is_zero() {
                continue;
            }
            for (j, b) in d.c.iter().enumerate() {
                if !b.is_zero() {
                    r[k + j] = r[k + j].minus(&t.times(b));
                }
            }
            quo[k] = t;
        }
        r.truncate(dd);
        (Self::from_coeffs(quo), Self::from_coeffs(r))
    }

    /// Monic gcd (zero iff both inputs are zero).
    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            if b.is_constant() {
                return Self::one();
            }
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> Self {
        if self.c.len() <= 1 {
            return Self::zero();
        }
        Self::from_coeffs(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, a)| a.times(&F::from_i64(i as i64)))
                .collect(),
        )
    }

    pub fn eval(&self, x: &F) -> F {
        let mut acc = F::zero();
        for a in self.c.iter().rev() {
            acc = acc.times(x).plus(a);
        }
        acc
    }

    /// Composition self(g).
    pub fn compose(&self, g: &Self) -> Self {
        let mut acc = Self::zero();
        for a in self.c.iter().rev() {
            acc = acc.times(g).plus(&Self::constant(a.clone()));
        }
        acc
    }

    /// Coefficient list reversed to length n+1 (x^n p(1/x)); requires deg <= n.
    pub fn reversed(&self, n: usize) -> Self {
        let mut c = vec![F::zero(); n + 1];
        for (i, a) in self.c.iter().enumerate() {
            c[n - i] = a.clone();
        }
        Self::from_coeffs(c)
    }

    pub fn map_coeffs(&self, f: impl Fn(&F) -> F) -> Self {
        Self::from_coeffs(self.c.iter().map(f).collect())
    }

    pub fn render(&self, vars: &[&str]) -> String {
        let (x, inner) = vars.split_last().expect("variable name required");
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, a) in self.c.iter().enumerate().rev() {
            if a.is_zero() {
                continue;
            }
            let mono = match k {
                0 => String::new(),
                1 => x.to_string(),
                _ => format!("{x}^{k}"),
            };
            let neg_one = a.negate().is_one();
            let s = if k == 0 {
                a.render(inner)
            } else if a.is_one() {
                mono
            } else if neg_one {
                format!("-{mono}")
            } else if a.is_compound() {
                format!("({})*{mono}", a.render(inner))
            } else {
                format!("{}*{mono}", a.render(inner))
            };
            if out.is_empty() {
                out = s;
            } else if let Some(rest) = s.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(&s);
            }
        }
        out
    }
}
