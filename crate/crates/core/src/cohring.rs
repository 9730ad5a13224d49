//! Cohomology of the base S and of the (double) projective bundle X.
//!
//! H(X) = H(S)[h, ξ]/(f_F, f_{N⊕𝒪}) with f_F = ∏(h + L_i) and
//! f_{N⊕𝒪} = ξ∏(ξ − h + L′_i). A single bundle drops ξ and f_{N⊕𝒪}.

use crate::exactalg::{Field, Rational};
use crate::geometry::{BaseKind, Geometry};
use std::collections::{BTreeMap, HashMap};

/// Structure-constant description of H(S). Basis index 0 is the unit.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseAlgebra {
    pub rank: usize,
    pub degrees: Vec<u32>,
    /// mult[i][j] = coefficient vector of T̄_i·T̄_j
    pub mult: Vec<Vec<Vec<Rational>>>,
    /// ∫_S T̄_i
    pub integral: Vec<Rational>,
    /// Basis indices of the divisor generators.
    pub divisors: Vec<usize>,
    /// Each basis element as a monomial in the divisor generators.
    pub monomials: Vec<Vec<u32>>,
    pub dim: u32,
}

impl BaseAlgebra {
    pub fn builtin(kind: BaseKind) -> Self {
        let z = Rational::zero;
        let o = Rational::one;
        match kind {
            BaseKind::Point => BaseAlgebra {
                rank: 1,
                degrees: vec![0],
                mult: vec![vec![vec![o()]]],
                integral: vec![o()],
                divisors: vec![],
                monomials: vec![vec![]],
                dim: 0,
            },
            BaseKind::P1 => BaseAlgebra {
                rank: 2,
                degrees: vec![0, 1],
                mult: vec![
                    vec![vec![o(), z()], vec![z(), o()]],
                    vec![vec![z(), o()], vec![z(), z()]],
                ],
                integral: vec![z(), o()],
                divisors: vec![1],
                monomials: vec![vec![0], vec![1]],
                dim: 1,
            },
        }
    }

    pub fn mul(&self, a: &[Rational], b: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.rank];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                let xy = x.times(y);
                for (k, c) in self.mult[i][j].iter().enumerate() {
                    if !c.is_zero() {
                        out[k] = out[k].plus(&xy.times(c));
                    }
                }
            }
        }
        out
    }

    pub fn unit(&self) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.rank];
        v[0] = Rational::one();
        v
    }

    /// Divisor class Σ_g c_g D_g.
    pub fn divisor_class(&self, c: &[i64]) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.rank];
        for (g, &k) in c.iter().enumerate() {
            v[self.divisors[g]] = Rational::from_i64(k);
        }
        v
    }
}

/// Element of H(X) in the canonical basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CohClass(pub Vec<Rational>);

impl CohClass {
    pub fn zero(n: usize) -> Self {
        CohClass(vec![Rational::zero(); n])
    }
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zero(n);
        v.0[i] = Rational::one();
        v
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }
    pub fn plus(&self, o: &Self) -> Self {
        CohClass(self.0.iter().zip(&o.0).map(|(a, b)| a.plus(b)).collect())
    }
    pub fn minus(&self, o: &Self) -> Self {
        CohClass(self.0.iter().zip(&o.0).map(|(a, b)| a.minus(b)).collect())
    }
    pub fn scale(&self, c: &Rational) -> Self {
        CohClass(self.0.iter().map(|a| a.times(c)).collect())
    }
    pub fn add_scaled(&mut self, o: &Self, c: &Rational) {
        if c.is_zero() {
            return;
        }
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            if !b.is_zero() {
                *a = a.plus(&b.times(c));
            }
        }
    }
}

/// Derivative direction: t¹ (h), t² (ξ), or a base divisor generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    H,
    Xi,
    Base(usize),
}

type HPoly = BTreeMap<(u32, u32), Vec<Rational>>;

/// H(X) with its canonical basis T̄_i h^l ξ^m.
#[derive(Clone, Debug)]
pub struct TotalAlgebra {
    pub base: BaseAlgebra,
    pub r: usize,
    pub double: bool,
    /// c₁(L_i), c₁(L′_i) as base vectors
    pub l_classes: Vec<Vec<Rational>>,
    pub lp_classes: Vec<Vec<Rational>>,
    /// basis[k] = (base index, l, m), in display order
    pub basis: Vec<(usize, u32, u32)>,
    index: HashMap<(usize, u32, u32), usize>,
    table: Vec<Vec<CohClass>>,
    rel_h: HPoly,
    rel_xi: Option<HPoly>,
    pub gram: Vec<Vec<Rational>>,
    pub gram_inv: Vec<Vec<Rational>>,
}

impl TotalAlgebra {
    pub fn new(geo: &Geometry) -> Self {
        let base = BaseAlgebra::builtin(geo.base);
        let r = geo.r;
        let double = geo.is_double();
        let l_classes: Vec<_> = (0..=r).map(|i| base.divisor_class(&geo.line_class(false, i))).collect();
        let lp_classes: Vec<_> = (0..=r).map(|i| base.divisor_class(&geo.line_class(true, i))).collect();
        let mmax = if double { r as u32 + 1 } else { 0 };
        let mut basis = Vec::new();
        for i in 0..base.rank {
            for l in 0..=r as u32 {
                for m in 0..=mmax {
                    basis.push((i, l, m));
                }
            }
        }
        // total degree ascending, then h-power descending, then ξ-power descending, then base index
        basis.sort_by_key(|&(i, l, m)| (base.degrees[i] + l + m, std::cmp::Reverse(l), std::cmp::Reverse(m), i));
        let index = basis.iter().enumerate().map(|(k, b)| (*b, k)).collect();
        let mut alg = TotalAlgebra {
            base,
            r,
            double,
            l_classes,
            lp_classes,
            basis,
            index,
            table: Vec::new(),
            rel_h: HPoly::new(),
            rel_xi: None,
            gram: Vec::new(),
            gram_inv: Vec::new(),
        };
        alg.rel_h = alg.chern_h();
        if double {
            alg.rel_xi = Some(alg.chern_xi());
        }
        let n = alg.rank();
        let mut table = vec![vec![CohClass::zero(n); n]; n];
        for a in 0..n {
            for b in a..n {
                let p = alg.poly_mul(&alg.basis_poly(a), &alg.basis_poly(b));
                let c = alg.reduce(p, true);
                table[a][b] = c.clone();
                table[b][a] = c;
            }
        }
        alg.table = table;
        let gram: Vec<Vec<Rational>> = (0..n)
            .map(|a| (0..n).map(|b| alg.integral(&alg.table[a][b].clone())).collect())
            .collect();
        alg.gram_inv = invert_matrix(&gram).expect("Poincaré pairing is degenerate");
        alg.gram = gram;
        alg
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> u32 {
        self.base.dim + self.r as u32 + if self.double { self.r as u32 + 1 } else { 0 }
    }

    pub fn degree(&self, k: usize) -> u32 {
        let (i, l, m) = self.basis[k];
        self.base.degrees[i] + l + m
    }

    pub fn index_of(&self, i: usize, l: u32, m: u32) -> Option<usize> {
        self.index.get(&(i, l, m)).copied()
    }

    /// Human label of basis element k, e.g. "hξp".
    pub fn label(&self, k: usize) -> String {
        let (i, l, m) = self.basis[k];
        let mut s = String::new();
        let hp = |s: &mut String, name: &str, e: u32| match e {
            0 => {}
            1 => s.push_str(name),
            _ => s.push_str(&format!("{name}^{e}")),
        };
        hp(&mut s, "h", l);
        hp(&mut s, "ξ", m);
        for (g, &e) in self.base.monomials[i].iter().enumerate() {
            let name = if self.base.divisors.len() == 1 { "p".to_string() } else { format!("p{g}") };
            hp(&mut s, &name, e);
        }
        if s.is_empty() {
            s.push('1');
        }
        s
    }

    pub fn one(&self) -> CohClass {
        CohClass::basis(self.rank(), 0)
    }

    pub fn basis_class(&self, k: usize) -> CohClass {
        CohClass::basis(self.rank(), k)
    }

    pub fn h(&self) -> CohClass {
        self.basis_class(self.index_of(0, 1, 0).unwrap())
    }

    pub fn xi(&self) -> CohClass {
        assert!(self.double, "ξ needs a double bundle");
        self.basis_class(self.index_of(0, 0, 1).unwrap())
    }

    /// Pull-back of a base vector.
    pub fn from_base(&self, v: &[Rational]) -> CohClass {
        let mut c = CohClass::zero(self.rank());
        for (i, x) in v.iter().enumerate() {
            c.0[self.index_of(i, 0, 0).unwrap()] = x.clone();
        }
        c
    }

    /// a_i = h + L_i.
    pub fn a_class(&self, i: usize) -> CohClass {
        self.h().plus(&self.from_base(&self.l_classes[i]))
    }

    /// b_i = ξ − h + L′_i.
    pub fn b_class(&self, i: usize) -> CohClass {
        self.xi().minus(&self.h()).plus(&self.from_base(&self.lp_classes[i]))
    }

    pub fn dirs(&self) -> Vec<Dir> {
        let mut v = vec![Dir::H];
        if self.double {
            v.push(Dir::Xi);
        }
        for g in 0..self.base.divisors.len() {
            v.push(Dir::Base(g));
        }
        v
    }

    pub fn dir_class(&self, d: Dir) -> CohClass {
        match d {
            Dir::H => self.h(),
            Dir::Xi => self.xi(),
            Dir::Base(g) => {
                let mut v = vec![Rational::zero(); self.base.rank];
                v[self.base.divisors[g]] = Rational::one();
                self.from_base(&v)
            }
        }
    }

    /// Exponents of basis element k over `dirs()`.
    pub fn basis_monomial(&self, k: usize) -> Vec<u32> {
        let (i, l, m) = self.basis[k];
        let mut v = vec![l];
        if self.double {
            v.push(m);
        }
        v.extend(self.base.monomials[i].iter().copied());
        v
    }

    pub fn mul(&self, a: &CohClass, b: &CohClass) -> CohClass {
        let n = self.rank();
        let mut out = CohClass::zero(n);
        for (i, x) in a.0.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.0.iter().enumerate() {
                if y.is_zero() {
                    continue;
                }
                out.add_scaled(&self.table[i][j], &x.times(y));
            }
        }
        out
    }

    pub fn pow(&self, a: &CohClass, e: u32) -> CohClass {
        let mut r = self.one();
        for _ in 0..e {
            r = self.mul(&r, a);
        }
        r
    }

    /// ∫_X, normalised so the point class integrates to 1.
    pub fn integral(&self, a: &CohClass) -> Rational {
        let mtop = if self.double { self.r as u32 + 1 } else { 0 };
        let mut s = Rational::zero();
        for (i, x) in self.base.integral.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            if let Some(k) = self.index_of(i, self.r as u32, mtop) {
                s = s.plus(&a.0[k].times(x));
            }
        }
        s
    }

    pub fn pairing(&self, a: &CohClass, b: &CohClass) -> Rational {
        self.integral(&self.mul(a, b))
    }

    /// Dual basis element T^k with ∫ T_j T^k = δ_jk.
    pub fn dual(&self, k: usize) -> CohClass {
        CohClass((0..self.rank()).map(|j| self.gram_inv[j][k].clone()).collect())
    }

    // ---- polynomial layer in h, ξ with base coefficients ----

    fn basis_poly(&self, k: usize) -> HPoly {
        let (i, l, m) = self.basis[k];
        let mut v = vec![Rational::zero(); self.base.rank];
        v[i] = Rational::one();
        let mut p = HPoly::new();
        p.insert((l, m), v);
        p
    }

    fn poly_add_term(&self, p: &mut HPoly, k: (u32, u32), v: &[Rational]) {
        let e = p.entry(k).or_insert_with(|| vec![Rational::zero(); self.base.rank]);
        for (a, b) in e.iter_mut().zip(v) {
            *a = a.plus(b);
        }
        if e.iter().all(|x| x.is_zero()) {
            p.remove(&k);
        }
    }

    fn poly_mul(&self, a: &HPoly, b: &HPoly) -> HPoly {
        let mut out = HPoly::new();
        for (ka, va) in a {
            for (kb, vb) in b {
                let v = self.base.mul(va, vb);
                if v.iter().any(|x| !x.is_zero()) {
                    self.poly_add_term(&mut out, (ka.0 + kb.0, ka.1 + kb.1), &v);
                }
            }
        }
        out
    }

    fn linear(&self, h: i64, xi: i64, base: &[Rational]) -> HPoly {
        let mut p = HPoly::new();
        let unit = self.base.unit();
        if h != 0 {
            p.insert((1, 0), unit.iter().map(|x| x.times(&Rational::from_i64(h))).collect());
        }
        if xi != 0 {
            p.insert((0, 1), unit.iter().map(|x| x.times(&Rational::from_i64(xi))).collect());
        }
        if base.iter().any(|x| !x.is_zero()) {
            p.insert((0, 0), base.to_vec());
        }
        p
    }

    fn chern_h(&self) -> HPoly {
        let mut p = self.linear(0, 0, &self.base.unit());
        for i in 0..=self.r {
            p = self.poly_mul(&p, &self.linear(1, 0, &self.l_classes[i]));
        }
        p
    }

    fn chern_xi(&self) -> HPoly {
        let mut p = self.linear(0, 1, &vec![Rational::zero(); self.base.rank]);
        for i in 0..=self.r {
            p = self.poly_mul(&p, &self.linear(-1, 1, &self.lp_classes[i]));
        }
        p
    }

    /// Normal form; `h_first` selects which relation is applied when both could.
    fn reduce(&self, mut p: HPoly, h_first: bool) -> CohClass {
        let r1 = self.r as u32 + 1;
        let r2 = self.r as u32 + 2;
        let mut out = CohClass::zero(self.rank());
        loop {
            let key = p
                .keys()
                .rev()
                .find(|&&(l, m)| l >= r1 || (self.double && m >= r2))
                .copied();
            let Some((l, m)) = key else { break };
            let coef = p.remove(&(l, m)).unwrap();
            let use_h = l >= r1 && (h_first || !(self.double && m >= r2));
            let (rel, lead) = if use_h {
                (&self.rel_h, (r1, 0))
            } else {
                (self.rel_xi.as_ref().unwrap(), (0, r2))
            };
            let sh = (l - lead.0, m - lead.1);
            for (k, v) in rel {
                if *k == lead {
                    continue;
                }
                let w: Vec<Rational> = self.base.mul(&coef, v).iter().map(|x| x.negate()).collect();
                if w.iter().any(|x| !x.is_zero()) {
                    self.poly_add_term(&mut p, (k.0 + sh.0, k.1 + sh.1), &w);
                }
            }
        }
        for ((l, m), v) in p {
            for (i, x) in v.iter().enumerate() {
                if !x.is_zero() {
                    let k = self.index_of(i, l, m).expect("canonical monomial");
                    out.0[k] = out.0[k].plus(x);
                }
            }
        }
        out
    }

    /// Reduces an (h, ξ)-polynomial with base coefficients given as a map.
    pub fn reduce_poly(&self, p: &BTreeMap<(u32, u32), Vec<Rational>>, h_first: bool) -> CohClass {
        self.reduce(p.clone(), h_first)
    }

    /// f_F and f_{N⊕𝒪} as (h, ξ)-polynomials.
    pub fn chern_relations(&self) -> Vec<BTreeMap<(u32, u32), Vec<Rational>>> {
        let mut v = vec![self.rel_h.clone()];
        if let Some(x) = &self.rel_xi {
            v.push(x.clone());
        }
        v
    }

    /// Flop correspondence T̄_i h^l ξ^m ↦ T̄_i (ξ′ − h′)^l ξ′^m in H(X′).
    pub fn flop_matrix(&self, other: &TotalAlgebra) -> Vec<Vec<Rational>> {
        let n = self.rank();
        let mut cols = Vec::with_capacity(n);
        let xmh = other.xi().minus(&other.h());
        for k in 0..n {
            let (i, l, m) = self.basis[k];
            let mut bv = vec![Rational::zero(); self.base.rank];
            bv[i] = Rational::one();
            let c = other.mul(
                &other.from_base(&bv),
                &other.mul(&other.pow(&xmh, l), &other.pow(&other.xi(), m)),
            );
            cols.push(c);
        }
        (0..n).map(|row| (0..n).map(|col| cols[col].0[row].clone()).collect()).collect()
    }
}

/// Applies a square matrix (rows over the target basis) to a class.
pub fn apply_matrix(m: &[Vec<Rational>], a: &CohClass) -> CohClass {
    CohClass(
        m.iter()
            .map(|row| {
                row.iter()
                    .zip(&a.0)
                    .fold(Rational::zero(), |acc, (x, y)| if y.is_zero() { acc } else { acc.plus(&x.times(y)) })
            })
            .collect(),
    )
}

/// Exact Gauss-Jordan inverse over ℚ; None when singular.
pub fn invert_matrix(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        inv.swap(c, p);
        let pv = a[c][c].recip();
        for j in 0..n {
            a[c][j] = a[c][j].times(&pv);
            inv[c][j] = inv[c][j].times(&pv);
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for j in 0..n {
                    let t = a[c][j].times(&f);
                    a[r][j] = a[r][j].minus(&t);
                    let t = inv[c][j].times(&f);
                    inv[r][j] = inv[r][j].minus(&t);
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactalg::qi;

    pub(crate) fn hirzebruch() -> Geometry {
        Geometry::new(1, BaseKind::P1, vec![vec![0], vec![1]], None).unwrap()
    }
    pub(crate) fn p1flop() -> Geometry {
        Geometry::new(1, BaseKind::P1, vec![vec![0], vec![0]], Some(vec![vec![0], vec![1]])).unwrap()
    }

    #[test]
    fn basis_order_matches_display() {
        let x = TotalAlgebra::new(&p1flop());
        let labels: Vec<_> = (0..12).map(|k| x.label(k)).collect();
        assert_eq!(
            labels,
            ["1", "h", "ξ", "p", "hξ", "hp", "ξ^2", "ξp", "hξ^2", "hξp", "ξ^2p", "hξ^2p"]
        );
        let y = TotalAlgebra::new(&hirzebruch());
        let labels: Vec<_> = (0..4).map(|k| y.label(k)).collect();
        assert_eq!(labels, ["1", "h", "p", "hp"]);
    }

    #[test]
    fn hirzebruch_relation() {
        let y = TotalAlgebra::new(&hirzebruch());
        let hp = y.h().plus(&y.from_base(&[qi(0), qi(1)]));
        assert!(y.mul(&y.h(), &hp).is_zero());
        assert_eq!(y.integral(&y.mul(&y.h(), &y.from_base(&[qi(0), qi(1)]))), qi(1));
        assert_eq!(y.integral(&y.mul(&y.h(), &y.h())), qi(-1));
    }

    #[test]
    fn flop_chern_relation_vanishes() {
        let x = TotalAlgebra::new(&p1flop());
        let prod = x.mul(&x.xi(), &x.mul(&x.b_class(0), &x.b_class(1)));
        assert!(prod.is_zero());
        assert!(x.mul(&x.a_class(0), &x.a_class(1)).is_zero());
        assert_eq!(x.mul(&x.one(), &x.h()), x.h());
    }

    #[test]
    fn associativity_and_confluence() {
        for g in [hirzebruch(), p1flop()] {
            let x = TotalAlgebra::new(&g);
            let n = x.rank();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let (ta, tb, tc) = (x.basis_class(a), x.basis_class(b), x.basis_class(c));
                        assert_eq!(x.mul(&x.mul(&ta, &tb), &tc), x.mul(&ta, &x.mul(&tb, &tc)));
                    }
                    let p = x.poly_mul(&x.basis_poly(a), &x.basis_poly(b));
                    assert_eq!(x.reduce(p.clone(), true), x.reduce(p, false));
                }
            }
        }
    }

    #[test]
    fn point_class_integrates_to_one() {
        let x = TotalAlgebra::new(&p1flop());
        assert_eq!(x.integral(&x.basis_class(11)), qi(1));
        assert_eq!(x.integral(&x.basis_class(5)), qi(0));
    }

    #[test]
    fn flop_map_preserves_pairing_but_not_products() {
        let g = p1flop();
        let x = TotalAlgebra::new(&g);
        let xp = TotalAlgebra::new(&g.mirror());
        let t = x.flop_matrix(&xp);
        for a in 0..12 {
            for b in 0..12 {
                let ta = apply_matrix(&t, &x.basis_class(a));
                let tb = apply_matrix(&t, &x.basis_class(b));
                assert_eq!(xp.pairing(&ta, &tb), x.pairing(&x.basis_class(a), &x.basis_class(b)));
            }
        }
        let th = apply_matrix(&t, &x.h());
        assert_eq!(th, xp.xi().minus(&xp.h()));
        let thh = apply_matrix(&t, &x.mul(&x.h(), &x.h()));
        let defect = thh.minus(&xp.mul(&th, &th));
        assert!(!defect.is_zero());
        assert!(xp.mul(&xp.xi(), &defect).is_zero());
    }
}
