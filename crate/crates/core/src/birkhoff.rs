//! Birkhoff factorization and generalized mirror transform: the operator
//! P(z), the gauge B to the Dubrovin connection, the z-free matrices C̃_a,
//! the mirror map τ and 3-point invariants read off C̃.
//!
//! Two routes to B are kept separate on purpose. Route (a) factors the
//! matrix of columns ∂^{zε}I class by class on the lifted box. Route (b)
//! solves the cancellation equation weight by weight from the connection
//! matrices alone, exactly in q₁.

use crate::cohring::{apply_matrix, CohClass, Dir, TotalAlgebra};
use crate::curveclasses::CurveClass;
use crate::exactalg::{CoeffElem, Field, RatFuncQ1, Rational, VarWeights};
use crate::geometry::Geometry;
use crate::ifunc::{class_of_lifted, lifted_coords, SeriesI};
use crate::lerayhirsch::{flop_u_shift, CMatrix, Connection};
use crate::pfsystem::OpCtx;
use std::collections::{BTreeMap, BTreeSet};

/// w = (s, e₂): u-power and q₂-power of a lifted monomial.
pub type Weight = (i64, i64);
/// Lifted exponents (s, e₁, e₂).
pub type Lifted = (i64, i64, i64);
pub type QMat = Vec<Vec<RatFuncQ1>>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BirkhoffError {
    #[error("weight {w:?}, z^{k}: the {dir:?} equation disagrees with the integrated solution")]
    Inconsistent { w: Weight, k: i32, dir: Dir },
    #[error("weight {0:?}: every integrating direction has zero weight but the right-hand side is nonzero")]
    NoIntegratingDirection(Weight),
    #[error("coefficient {0} has a negative u or q2 exponent")]
    NegativeExponent(String),
    #[error("connection at weight (0, 0) depends on z")]
    NotZFreeAtZero,
    #[error("mirror map at weight {0:?} disagrees along {1:?}")]
    TauInconsistent(Weight, Dir),
}

fn qzero(n: usize) -> QMat {
    vec![vec![RatFuncQ1::zero(); n]; n]
}

fn qid(n: usize) -> QMat {
    let mut m = qzero(n);
    for (i, r) in m.iter_mut().enumerate() {
        r[i] = RatFuncQ1::one();
    }
    m
}

fn q_is_zero(m: &QMat) -> bool {
    m.iter().all(|r| r.iter().all(|x| x.is_zero()))
}

/// acc += a·b, skipping zero entries.
fn q_mul_acc(acc: &mut QMat, a: &QMat, b: &QMat) {
    let n = a.len();
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if !b[k][j].is_zero() {
                    acc[i][j] = acc[i][j].plus(&a[i][k].times(&b[k][j]));
                }
            }
        }
    }
}

fn q_add_acc(acc: &mut QMat, a: &QMat, sign: i64) {
    for (r, ar) in acc.iter_mut().zip(a) {
        for (x, y) in r.iter_mut().zip(ar) {
            if !y.is_zero() {
                *x = if sign > 0 { x.plus(y) } else { x.minus(y) };
            }
        }
    }
}

fn q_map(m: &QMat, f: impl Fn(&RatFuncQ1) -> RatFuncQ1) -> QMat {
    m.iter().map(|r| r.iter().map(|x| if x.is_zero() { x.clone() } else { f(x) }).collect()).collect()
}

/// Eigenvalue of ∂_a on u^s q₂^{e₂}.
fn lambda(wt: &VarWeights, w: Weight) -> i64 {
    wt.u * w.0 + wt.q2 * w.1
}

/// ∂_a(u^s q₂^{e₂} f(q₁)) / (u^s q₂^{e₂}).
fn derive_q(wt: &VarWeights, w: Weight, f: &RatFuncQ1) -> RatFuncQ1 {
    let mut d = f.times(&RatFuncQ1::from_i64(lambda(wt, w)));
    if wt.q1 != 0 {
        d = d.plus(&f.derivative().times(&RatFuncQ1::x()).times(&RatFuncQ1::from_i64(wt.q1)));
    }
    d
}

/// Weights componentwise ≤ bound, in an order extending the partial order.
pub fn weights_upto(bound: Weight) -> Vec<Weight> {
    let mut v: Vec<Weight> = (0..=bound.0).flat_map(|s| (0..=bound.1).map(move |e| (s, e))).collect();
    v.sort_by_key(|&(s, e)| (s + e, s));
    v
}

fn leq(a: Weight, b: Weight) -> bool {
    a.0 <= b.0 && a.1 <= b.1
}

/// Matrix series Σ u^s q₂^{e₂} z^j M_{w,j}(q₁), truncated at a weight bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Graded {
    pub n: usize,
    pub bound: Weight,
    pub parts: BTreeMap<(Weight, i32), QMat>,
}

impl Graded {
    pub fn zero(n: usize, bound: Weight) -> Self {
        Graded { n, bound, parts: BTreeMap::new() }
    }

    pub fn identity(n: usize, bound: Weight) -> Self {
        let mut g = Self::zero(n, bound);
        g.parts.insert(((0, 0), 0), qid(n));
        g
    }

    /// Expands every entry in u up to the bound and drops q₂-powers beyond it.
    pub fn from_cmatrix(m: &CMatrix, bound: Weight) -> Result<Self, BirkhoffError> {
        let n = m.len();
        let mut g = Self::zero(n, bound);
        for (i, row) in m.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                for (&(z, e2), v) in c.terms() {
                    if e2 < 0 {
                        return Err(BirkhoffError::NegativeExponent(c.render()));
                    }
                    if e2 as i64 > bound.1 {
                        continue;
                    }
                    for (s, f) in crate::exactalg::birat_u_series(v, bound.0) {
                        if s < 0 {
                            return Err(BirkhoffError::NegativeExponent(c.render()));
                        }
                        let p = g.parts.entry(((s, e2 as i64), z)).or_insert_with(|| qzero(n));
                        p[i][j] = p[i][j].plus(&f);
                    }
                }
            }
        }
        g.prune();
        Ok(g)
    }

    /// Reassembles the truncated series as a matrix of coefficient elements.
    pub fn to_cmatrix(&self) -> CMatrix {
        let mut m = vec![vec![CoeffElem::zero(); self.n]; self.n];
        for (&((s, e2), z), p) in &self.parts {
            let mono = CoeffElem::monomial(z, e2 as i32, crate::exactalg::u_birat().pow(s));
            for i in 0..self.n {
                for j in 0..self.n {
                    if !p[i][j].is_zero() {
                        let c = mono.scale(&crate::exactalg::q1rat_birat(p[i][j].clone()));
                        m[i][j] = m[i][j].plus(&c);
                    }
                }
            }
        }
        m
    }

    fn prune(&mut self) {
        self.parts.retain(|_, p| !q_is_zero(p));
    }

    pub fn get(&self, w: Weight, j: i32) -> Option<&QMat> {
        self.parts.get(&(w, j))
    }

    fn add_part(&mut self, w: Weight, j: i32, m: &QMat, sign: i64) {
        if q_is_zero(m) || !leq(w, self.bound) {
            return;
        }
        let n = self.n;
        let p = self.parts.entry((w, j)).or_insert_with(|| qzero(n));
        q_add_acc(p, m, sign);
        if q_is_zero(p) {
            self.parts.remove(&(w, j));
        }
    }

    pub fn max_z(&self) -> i32 {
        self.parts.keys().map(|k| k.1).max().unwrap_or(0)
    }

    pub fn weights(&self) -> BTreeSet<Weight> {
        self.parts.keys().map(|k| k.0).collect()
    }

    pub fn is_z_free(&self) -> bool {
        self.parts.keys().all(|k| k.1 == 0)
    }

    /// Coefficient of u^{w} q₂^{e₂} z^k in self·o.
    pub fn conv_at(&self, o: &Graded, w: Weight, k: i32) -> QMat {
        let mut acc = qzero(self.n);
        for (&(w1, j1), a) in &self.parts {
            if !leq(w1, w) {
                continue;
            }
            let w2 = (w.0 - w1.0, w.1 - w1.1);
            if let Some(b) = o.parts.get(&(w2, k - j1)) {
                q_mul_acc(&mut acc, a, b);
            }
        }
        acc
    }

    pub fn mul(&self, o: &Graded) -> Graded {
        let bound = (self.bound.0.min(o.bound.0), self.bound.1.min(o.bound.1));
        let mut out = Graded::zero(self.n, bound);
        for (&(w1, j1), a) in &self.parts {
            for (&(w2, j2), b) in &o.parts {
                let w = (w1.0 + w2.0, w1.1 + w2.1);
                if !leq(w, bound) {
                    continue;
                }
                let p = out.parts.entry((w, j1 + j2)).or_insert_with(|| qzero(self.n));
                q_mul_acc(p, a, b);
            }
        }
        out.prune();
        out
    }

    pub fn minus(&self, o: &Graded) -> Graded {
        let mut out = self.clone();
        for (&(w, j), p) in &o.parts {
            out.add_part(w, j, p, -1);
        }
        out
    }

    /// Left multiplication by a constant matrix.
    pub fn left_const(&self, m: &[Vec<Rational>]) -> Graded {
        let c: QMat = m.iter().map(|r| r.iter().map(|x| RatFuncQ1::constant(x.clone())).collect()).collect();
        let mut out = Graded::zero(self.n, self.bound);
        for (&k, p) in &self.parts {
            let mut acc = qzero(self.n);
            q_mul_acc(&mut acc, &c, p);
            out.parts.insert(k, acc);
        }
        out.prune();
        out
    }

    /// Entrywise flop substitution q₁ ↦ 1/q₁, q₂ ↦ q₁q₂, u ↦ u q₁^k.
    pub fn flop(&self, k: i64) -> Graded {
        let mut out = Graded::zero(self.n, self.bound);
        for (&((s, e2), j), p) in &self.parts {
            let sh = RatFuncQ1::x_pow(e2 + k * s);
            out.parts.insert(((s, e2), j), q_map(p, |f| f.substitute_inverse().times(&sh)));
        }
        out
    }

    /// z-degree-zero part.
    pub fn z0(&self) -> Graded {
        let mut out = Graded::zero(self.n, self.bound);
        for (&(w, j), p) in &self.parts {
            if j == 0 {
                out.parts.insert((w, 0), p.clone());
            }
        }
        out
    }

    /// u^s q₁^{e₁} q₂^{e₂} z^j coefficients with 0 ≤ e₁ ≤ max_q1; also lists
    /// any negative q₁-power as a separate key so callers can flag it.
    pub fn expand_q1(&self, max_q1: i64) -> BTreeMap<(Lifted, i32), Vec<Vec<Rational>>> {
        let mut out: BTreeMap<(Lifted, i32), Vec<Vec<Rational>>> = BTreeMap::new();
        let n = self.n;
        for (&((s, e2), j), p) in &self.parts {
            for i in 0..n {
                for c in 0..n {
                    if p[i][c].is_zero() {
                        continue;
                    }
                    let (v, _) = p[i][c].laurent_at_zero(0);
                    let len = (max_q1 - v + 1).max(0) as usize;
                    let (v, cs) = p[i][c].laurent_at_zero(len);
                    for (t, x) in cs.into_iter().enumerate() {
                        if x.is_zero() {
                            continue;
                        }
                        let e1 = v + t as i64;
                        let m = out.entry(((s, e1, e2), j)).or_insert_with(|| vec![vec![Rational::zero(); n]; n]);
                        m[i][c] = x;
                    }
                }
            }
        }
        out
    }
}

/// Gauge data from route (b).
#[derive(Clone, Debug)]
pub struct Gauge {
    pub dirs: Vec<Dir>,
    pub bound: Weight,
    pub c: Vec<Graded>,
    pub b: Graded,
    pub b_inv: Graded,
    /// z-free C̃_a, one per direction.
    pub ct: Vec<Graded>,
    /// Mirror map at t̂ = 0 by weight; the weight-(0,0) part is t̂ itself.
    pub tau: BTreeMap<Weight, Vec<RatFuncQ1>>,
}

impl Gauge {
    pub fn ct_for(&self, d: Dir) -> &Graded {
        &self.ct[self.dirs.iter().position(|&x| x == d).unwrap()]
    }
}

fn integrating_dir(ctx: &OpCtx, w: Weight) -> Option<usize> {
    (0..ctx.n()).find(|&a| ctx.weights[a].q1 == 0 && lambda(&ctx.weights[a], w) != 0)
}

/// Route (b): solves z∂_aB = BC_a − C̃_aB weight by weight, descending in z.
pub fn gauge_from_connection(geo: &Geometry, conn: &Connection, bound: Weight) -> Result<Gauge, BirkhoffError> {
    let ctx = OpCtx::new(geo);
    let na = conn.dirs.len();
    let n = conn.mats[0].len();
    let c: Vec<Graded> = conn.mats.iter().map(|m| Graded::from_cmatrix(m, bound)).collect::<Result<_, _>>()?;
    let mut b = Graded::identity(n, bound);
    let mut ct: Vec<Graded> = Vec::with_capacity(na);
    for ca in &c {
        if ca.parts.keys().any(|k| k.0 == (0, 0) && k.1 != 0) {
            return Err(BirkhoffError::NotZFreeAtZero);
        }
        let mut g = Graded::zero(n, bound);
        if let Some(p) = ca.get((0, 0), 0) {
            g.parts.insert(((0, 0), 0), p.clone());
        }
        ct.push(g);
    }
    let cmax = c.iter().map(|g| g.max_z()).max().unwrap_or(0);
    for w in weights_upto(bound).into_iter().skip(1) {
        let top = b.max_z() + cmax + 1;
        for k in (1..=top).rev() {
            let rhs: Vec<QMat> = (0..na)
                .map(|a| {
                    let mut r = b.conv_at(&c[a], w, k);
                    q_add_acc(&mut r, &ct[a].conv_at(&b, w, k), -1);
                    r
                })
                .collect();
            if rhs.iter().all(q_is_zero) {
                continue;
            }
            let a0 = integrating_dir(&ctx, w).ok_or(BirkhoffError::NoIntegratingDirection(w))?;
            let l = RatFuncQ1::from_i64(lambda(&ctx.weights[a0], w));
            let sol = q_map(&rhs[a0], |f| f.over(&l));
            for (a, r) in rhs.iter().enumerate() {
                let d = q_map(&sol, |f| derive_q(&ctx.weights[a], w, f));
                if &d != r {
                    return Err(BirkhoffError::Inconsistent { w, k, dir: ctx.dirs[a] });
                }
            }
            b.add_part(w, k - 1, &sol, 1);
        }
        for a in 0..na {
            let mut r = b.conv_at(&c[a], w, 0);
            q_add_acc(&mut r, &ct[a].conv_at(&b, w, 0), -1);
            ct[a].add_part(w, 0, &r, 1);
        }
    }
    let b_inv = graded_inverse(&b);
    let tau = mirror_map_from_ct(&ctx, &ct, n, bound)?;
    Ok(Gauge { dirs: conn.dirs.clone(), bound, c, b, b_inv, ct, tau })
}

/// Inverse of a series with identity weight-(0,0) part.
pub fn graded_inverse(b: &Graded) -> Graded {
    let n = b.n;
    let mut inv = Graded::identity(n, b.bound);
    for w in weights_upto(b.bound).into_iter().skip(1) {
        let top = b.max_z() * (w.0 + w.1 + 1) as i32;
        for k in 0..=top {
            let r = b.conv_at(&inv, w, k);
            inv.add_part(w, k, &r, -1);
        }
    }
    inv
}

/// ∂_aτ is the first column of C̃_a; integrate along a direction of nonzero weight.
fn mirror_map_from_ct(ctx: &OpCtx, ct: &[Graded], n: usize, bound: Weight) -> Result<BTreeMap<Weight, Vec<RatFuncQ1>>, BirkhoffError> {
    let mut tau = BTreeMap::new();
    for w in weights_upto(bound).into_iter().skip(1) {
        let cols: Vec<Vec<RatFuncQ1>> = ct
            .iter()
            .map(|g| g.get(w, 0).map_or_else(|| vec![RatFuncQ1::zero(); n], |m| m.iter().map(|r| r[0].clone()).collect()))
            .collect();
        if cols.iter().all(|c| c.iter().all(|x| x.is_zero())) {
            continue;
        }
        let a0 = integrating_dir(ctx, w).ok_or(BirkhoffError::NoIntegratingDirection(w))?;
        let l = RatFuncQ1::from_i64(lambda(&ctx.weights[a0], w));
        let t: Vec<RatFuncQ1> = cols[a0].iter().map(|f| f.over(&l)).collect();
        for (a, col) in cols.iter().enumerate() {
            let d: Vec<RatFuncQ1> = t.iter().map(|f| derive_q(&ctx.weights[a], w, f)).collect();
            if &d != col {
                return Err(BirkhoffError::TauInconsistent(w, ctx.dirs[a]));
            }
        }
        tau.insert(w, t);
    }
    Ok(tau)
}

/// Where an identity checked on the gauge fails.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeResidual {
    pub what: &'static str,
    pub dir: Dir,
    pub w: Weight,
    pub k: i32,
}

/// Checks C̃_a = B₀C_{a;0}B₀⁻¹, the full gauge equation
/// −z∂_aB + BC_a − C̃_aB = 0, z-freeness of C̃ and B·B⁻¹ = Id.
pub fn reduced_connection_residuals(geo: &Geometry, g: &Gauge) -> Vec<GaugeResidual> {
    let ctx = OpCtx::new(geo);
    let mut out = Vec::new();
    let b0 = g.b.z0();
    let bi0 = g.b_inv.z0();
    let prod = g.b.mul(&g.b_inv);
    if prod != Graded::identity(g.b.n, prod.bound) {
        let (w, k) = prod.parts.keys().find(|k| **k != ((0, 0), 0)).copied().unwrap_or(((0, 0), 0));
        out.push(GaugeResidual { what: "B·B⁻¹ = Id", dir: Dir::H, w, k });
    }
    for (a, &d) in g.dirs.iter().enumerate() {
        if !g.ct[a].is_z_free() {
            let (w, k) = *g.ct[a].parts.keys().find(|k| k.1 != 0).unwrap();
            out.push(GaugeResidual { what: "C̃ z-free", dir: d, w, k });
        }
        let q = b0.mul(&g.c[a].z0()).mul(&bi0);
        if let Some((w, k)) = q.minus(&g.ct[a]).parts.keys().next() {
            out.push(GaugeResidual { what: "C̃ = B₀C₀B₀⁻¹", dir: d, w: *w, k: *k });
        }
        // z∂_aB shifts z-degree by one
        let mut zdb = Graded::zero(g.b.n, g.bound);
        for (&(w, j), p) in &g.b.parts {
            zdb.parts.insert((w, j + 1), q_map(p, |f| derive_q(&ctx.weights[a], w, f)));
        }
        zdb.prune();
        let res = g.b.mul(&g.c[a]).minus(&g.ct[a].mul(&g.b)).minus(&zdb);
        if let Some((w, k)) = res.parts.keys().next() {
            out.push(GaugeResidual { what: "gauge equation", dir: d, w: *w, k: *k });
        }
    }
    out
}

/// z-graded matrices with rational entries.
pub type ZMat = BTreeMap<i32, Vec<Vec<Rational>>>;
/// z-graded vectors.
pub type ZVec = BTreeMap<i32, Vec<Rational>>;

fn zmat_mul_acc(acc: &mut ZMat, a: &ZMat, b: &ZMat, n: usize) {
    for (&i, x) in a {
        for (&j, y) in b {
            let e = acc.entry(i + j).or_insert_with(|| vec![vec![Rational::zero(); n]; n]);
            for r in 0..n {
                for k in 0..n {
                    if x[r][k].is_zero() {
                        continue;
                    }
                    for c in 0..n {
                        if !y[k][c].is_zero() {
                            e[r][c] = e[r][c].plus(&x[r][k].times(&y[k][c]));
                        }
                    }
                }
            }
        }
    }
}

fn zmat_prune(m: &mut ZMat) {
    m.retain(|_, v| v.iter().any(|r| r.iter().any(|x| !x.is_zero())));
}

fn zmat_mul_vec(m: &ZMat, v: &ZVec, n: usize) -> ZVec {
    let mut out: ZVec = BTreeMap::new();
    for (&i, x) in m {
        for (&j, y) in v {
            let e = out.entry(i + j).or_insert_with(|| vec![Rational::zero(); n]);
            for r in 0..n {
                for k in 0..n {
                    if !x[r][k].is_zero() && !y[k].is_zero() {
                        e[r] = e[r].plus(&x[r][k].times(&y[k]));
                    }
                }
            }
        }
    }
    zvec_prune(&mut out);
    out
}

fn zvec_prune(v: &mut ZVec) {
    v.retain(|_, x| x.iter().any(|y| !y.is_zero()));
}

fn zvec_add(acc: &mut ZVec, o: &ZVec, n: usize) {
    for (&k, x) in o {
        let e = acc.entry(k).or_insert_with(|| vec![Rational::zero(); n]);
        for (a, b) in e.iter_mut().zip(x) {
            *a = a.plus(b);
        }
    }
    zvec_prune(acc);
}

/// Column matrix (∂^{zε}I_β) at t̂ = 0: entry [κ][ε] is the T_κ-component.
pub fn column_matrices(alg: &TotalAlgebra, geo: &Geometry, i: &SeriesI) -> BTreeMap<Lifted, ZMat> {
    let ctx = OpCtx::new(geo);
    let n = alg.rank();
    let cols: Vec<_> = (0..n).map(|e| crate::pfsystem::derivative_series(&ctx, alg, &alg.basis_monomial(e), i)).collect();
    let mut out = BTreeMap::new();
    for beta in i.terms.keys() {
        let mut m: ZMat = BTreeMap::new();
        for (e, col) in cols.iter().enumerate() {
            if let Some(s) = col.get(beta) {
                for (&k, cls) in &s.terms {
                    let mm = m.entry(k).or_insert_with(|| vec![vec![Rational::zero(); n]; n]);
                    for (kap, x) in cls.0.iter().enumerate() {
                        mm[kap][e] = x.clone();
                    }
                }
            }
        }
        zmat_prune(&mut m);
        if !m.is_empty() {
            out.insert(lifted_coords(geo, beta), m);
        }
    }
    out
}

fn lifted_leq(a: Lifted, b: Lifted) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && a.2 <= b.2
}

fn lifted_sub(a: Lifted, b: Lifted) -> Lifted {
    (a.0 - b.0, a.1 - b.1, a.2 - b.2)
}

fn box_points(geo: &Geometry, i: &SeriesI) -> Vec<Lifted> {
    let mut v: Vec<Lifted> = i.bx.classes(geo).iter().map(|b| lifted_coords(geo, b)).collect();
    v.sort_by_key(|&(s, e1, e2)| (s + e1 + e2, s, e2, e1));
    v
}

/// Route (a): (∂^{zε}I) = L·B with L = Id + O(1/z), B polynomial in z.
#[derive(Clone, Debug, Default)]
pub struct ClassFactorization {
    pub b: BTreeMap<Lifted, ZMat>,
    pub l: BTreeMap<Lifted, ZMat>,
}

pub fn birkhoff_columns(alg: &TotalAlgebra, geo: &Geometry, i: &SeriesI) -> ClassFactorization {
    let n = alg.rank();
    let m = column_matrices(alg, geo, i);
    let mut f = ClassFactorization::default();
    for beta in box_points(geo, i) {
        if beta == (0, 0, 0) {
            continue;
        }
        let mut s: ZMat = m.get(&beta).cloned().unwrap_or_default();
        let mut sub: ZMat = BTreeMap::new();
        for (&b1, l1) in &f.l {
            if !lifted_leq(b1, beta) {
                continue;
            }
            if let Some(b2) = f.b.get(&lifted_sub(beta, b1)) {
                zmat_mul_acc(&mut sub, l1, b2, n);
            }
        }
        for (k, x) in sub {
            let e = s.entry(k).or_insert_with(|| vec![vec![Rational::zero(); n]; n]);
            for (r, xr) in e.iter_mut().zip(&x) {
                for (a, b) in r.iter_mut().zip(xr) {
                    *a = a.minus(b);
                }
            }
        }
        zmat_prune(&mut s);
        let neg: ZMat = s.iter().filter(|(k, _)| **k < 0).map(|(k, v)| (*k, v.clone())).collect();
        let pos: ZMat = s.into_iter().filter(|(k, _)| *k >= 0).collect();
        if !neg.is_empty() {
            f.l.insert(beta, neg);
        }
        if !pos.is_empty() {
            f.b.insert(beta, pos);
        }
    }
    f
}

/// First disagreement between the two routes to B on their common range.
#[derive(Clone, Debug, PartialEq)]
pub struct RouteMismatch {
    pub class: Lifted,
    pub z: i32,
    pub row: usize,
    pub col: usize,
}

pub fn compare_routes(g: &Gauge, f: &ClassFactorization, bx: &crate::ifunc::LiftedBox) -> Vec<RouteMismatch> {
    let exp = g.b.expand_q1(bx.dmax);
    let in_range = |c: Lifted| c.0 <= bx.bs.min(g.bound.0) && c.2 <= bx.d2.min(g.bound.1) && c.1 <= bx.dmax && c != (0, 0, 0);
    let mut keys: BTreeSet<(Lifted, i32)> = exp.keys().filter(|k| in_range(k.0)).copied().collect();
    for (c, m) in &f.b {
        if in_range(*c) {
            keys.extend(m.keys().map(|z| (*c, *z)));
        }
    }
    let mut out = Vec::new();
    for (c, z) in keys {
        let a = exp.get(&(c, z));
        let b = f.b.get(&c).and_then(|m| m.get(&z));
        let n = g.b.n;
        for r in 0..n {
            for col in 0..n {
                let x = a.map_or_else(Rational::zero, |m| m[r][col].clone());
                let y = b.map_or_else(Rational::zero, |m| m[r][col].clone());
                if x != y {
                    out.push(RouteMismatch { class: c, z, row: r, col });
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BfOrder {
    /// Induction on single classes in order of total lifted degree.
    ClassByClass,
    /// Induction on weights, sweeping whole q₁-series from the top z-power down.
    WeightSweep,
}

/// P(z) at t̂ = 0 with J = P(z)I.
#[derive(Clone, Debug, PartialEq)]
pub struct BfResult {
    /// P_β = Σ_ε c_{β,ε}(z) ∂^{zε}, as z ↦ vector over ε.
    pub p: BTreeMap<Lifted, ZVec>,
    /// J_β.
    pub j: BTreeMap<Lifted, ZVec>,
    /// τ_β, the z⁻¹-coefficient of J_β.
    pub tau: BTreeMap<Lifted, Vec<Rational>>,
    /// Classes on which P, J and τ are exact.
    pub resolved: BTreeSet<Lifted>,
}

pub fn bf_gmt(alg: &TotalAlgebra, geo: &Geometry, i: &SeriesI, order: BfOrder) -> BfResult {
    let n = alg.rank();
    let m = column_matrices(alg, geo, i);
    let pts = box_points(geo, i);
    let mut unit: ZVec = BTreeMap::new();
    let mut e0 = vec![Rational::zero(); n];
    e0[0] = Rational::from_i64(1);
    unit.insert(0, e0);
    let mut p: BTreeMap<Lifted, ZVec> = BTreeMap::new();
    p.insert((0, 0, 0), unit.clone());
    let mut j: BTreeMap<Lifted, ZVec> = BTreeMap::new();
    match order {
        BfOrder::ClassByClass => {
            for &beta in &pts {
                if beta == (0, 0, 0) {
                    j.insert(beta, unit.clone());
                    continue;
                }
                let mut x: ZVec = BTreeMap::new();
                for (&b1, c) in &p {
                    if let Some(mm) = m.get(&lifted_sub(beta, b1)).filter(|_| lifted_leq(b1, beta)) {
                        zvec_add(&mut x, &zmat_mul_vec(mm, c, n), n);
                    }
                }
                let pos: ZVec = x.iter().filter(|(k, _)| **k >= 0).map(|(k, v)| (*k, v.iter().map(|y| y.negate()).collect())).collect();
                x.retain(|k, _| *k < 0);
                if !pos.is_empty() {
                    p.insert(beta, pos);
                }
                j.insert(beta, x);
            }
        }
        BfOrder::WeightSweep => {
            let mut x: BTreeMap<Lifted, ZVec> = pts
                .iter()
                .map(|&b| (b, m.get(&b).map_or_else(BTreeMap::new, |mm| zmat_mul_vec(mm, &unit, n))))
                .collect();
            let mut ws: Vec<Weight> = pts.iter().map(|b| (b.0, b.2)).collect::<BTreeSet<_>>().into_iter().collect();
            ws.sort_by_key(|&(s, e)| (s + e, s));
            for w in ws {
                let cls: Vec<Lifted> = pts.iter().copied().filter(|b| (b.0, b.2) == w && *b != (0, 0, 0)).collect();
                loop {
                    let top = cls.iter().filter_map(|b| x[b].keys().next_back().copied()).filter(|&k| k >= 0).max();
                    let Some(k) = top else { break };
                    for &beta in &cls {
                        let Some(v) = x[&beta].get(&k).cloned() else { continue };
                        let mut delta: ZVec = BTreeMap::new();
                        delta.insert(k, v.iter().map(|y| y.negate()).collect());
                        zvec_add(p.entry(beta).or_default(), &delta, n);
                        for &tgt in &pts {
                            if !lifted_leq(beta, tgt) {
                                continue;
                            }
                            if let Some(mm) = m.get(&lifted_sub(tgt, beta)) {
                                let add = zmat_mul_vec(mm, &delta, n);
                                zvec_add(x.get_mut(&tgt).unwrap(), &add, n);
                            }
                        }
                    }
                }
            }
            p.retain(|_, v| !v.is_empty());
            j = x;
            j.insert((0, 0, 0), unit.clone());
        }
    }
    let tau = j
        .iter()
        .filter(|(b, _)| **b != (0, 0, 0))
        .filter_map(|(b, v)| v.get(&-1).map(|t| (*b, t.clone())))
        .collect();
    BfResult { p, j, tau, resolved: pts.into_iter().collect() }
}

/// Classes where P(z)I still has a non-negative z-power (other than J₀ = 1).
pub fn nonnegative_z_classes(bf: &BfResult) -> Vec<Lifted> {
    bf.j.iter()
        .filter(|(b, v)| **b != (0, 0, 0) && v.keys().any(|&k| k >= 0))
        .map(|(b, _)| *b)
        .collect()
}

/// P_β against the first column of B⁻¹ from route (b), on the common range.
pub fn compare_p_with_gauge(bf: &BfResult, g: &Gauge, bx: &crate::ifunc::LiftedBox) -> Vec<Lifted> {
    let exp = g.b_inv.expand_q1(bx.dmax);
    let in_range = |c: Lifted| c.0 <= bx.bs.min(g.bound.0) && c.2 <= bx.d2.min(g.bound.1) && c != (0, 0, 0);
    let mut from_gauge: BTreeMap<Lifted, ZVec> = BTreeMap::new();
    for ((c, z), m) in &exp {
        if in_range(*c) {
            let col: Vec<Rational> = m.iter().map(|r| r[0].clone()).collect();
            if col.iter().any(|x| !x.is_zero()) {
                from_gauge.entry(*c).or_default().insert(*z, col);
            }
        }
    }
    let from_bf: BTreeMap<Lifted, ZVec> = bf.p.iter().filter(|(c, _)| in_range(**c)).map(|(c, v)| (*c, v.clone())).collect();
    let keys: BTreeSet<Lifted> = from_gauge.keys().chain(from_bf.keys()).copied().collect();
    keys.into_iter().filter(|k| from_gauge.get(k) != from_bf.get(k)).collect()
}

/// τ from the BF/GMT run against τ integrated from C̃.
pub fn compare_tau(bf: &BfResult, g: &Gauge, bx: &crate::ifunc::LiftedBox) -> Vec<Lifted> {
    let n = g.b.n;
    let mut from_gauge: BTreeMap<Lifted, Vec<Rational>> = BTreeMap::new();
    for (&(s, e2), t) in &g.tau {
        if s > bx.bs || e2 > bx.d2 {
            continue;
        }
        for (k, f) in t.iter().enumerate() {
            if f.is_zero() {
                continue;
            }
            let (v, _) = f.laurent_at_zero(0);
            let (v, cs) = f.laurent_at_zero((bx.dmax - v + 1).max(0) as usize);
            for (i, x) in cs.into_iter().enumerate() {
                if !x.is_zero() {
                    from_gauge.entry((s, v + i as i64, e2)).or_insert_with(|| vec![Rational::zero(); n])[k] = x;
                }
            }
        }
    }
    let in_range = |c: &Lifted| c.0 <= g.bound.0 && c.2 <= g.bound.1;
    let from_bf: BTreeMap<Lifted, Vec<Rational>> =
        bf.tau.iter().filter(|(c, v)| in_range(c) && v.iter().any(|x| !x.is_zero())).map(|(c, v)| (*c, v.clone())).collect();
    let keys: BTreeSet<Lifted> = from_gauge.keys().chain(from_bf.keys()).copied().collect();
    keys.into_iter().filter(|k| from_gauge.get(k) != from_bf.get(k)).collect()
}

/// One 3-point invariant ⟨T_a, T_ν, T^κ⟩_β read from C̃ at t̂ = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Invariant {
    pub dir: Dir,
    pub nu: usize,
    pub kappa: usize,
    pub class: CurveClass,
    pub value: Rational,
    pub label: String,
    /// Set when a nonzero mirror-map correction at or below this weight could
    /// contaminate the reading.
    pub flagged: bool,
}

fn dir_label(d: Dir) -> &'static str {
    match d {
        Dir::H => "h",
        Dir::Xi => "xi",
        Dir::Base(_) => "p",
    }
}

/// Entry [κ][ν] of C̃_a at u^s q₁^{e₁} q₂^{e₂}, β ≠ 0, read as ⟨T_a, T_ν, T^κ⟩_β.
pub fn extract_invariants(alg: &TotalAlgebra, geo: &Geometry, g: &Gauge, max_q1: i64) -> Vec<Invariant> {
    let tau_weights: Vec<Weight> = g.tau.iter().filter(|(_, t)| t.iter().any(|x| !x.is_zero())).map(|(w, _)| *w).collect();
    let mut out = Vec::new();
    for (a, &d) in g.dirs.iter().enumerate() {
        for (((s, e1, e2), _), m) in g.ct[a].expand_q1(max_q1) {
            if (s, e1, e2) == (0, 0, 0) {
                continue;
            }
            let class = class_of_lifted(geo, s, e1, e2);
            let flagged = tau_weights.iter().any(|&w| leq(w, (s, e2)));
            for (kappa, row) in m.iter().enumerate() {
                for (nu, v) in row.iter().enumerate() {
                    if v.is_zero() {
                        continue;
                    }
                    out.push(Invariant {
                        dir: d,
                        nu,
                        kappa,
                        class: class.clone(),
                        value: v.clone(),
                        label: format!("<{}, {}, ({})*>", dir_label(d), alg.label(nu), alg.label(kappa)),
                        flagged,
                    });
                }
            }
        }
    }
    out
}

/// ⟨γ⟩_β = ∫ γ ∪ [z⁻²]J_β, valid where τ = t̂ at the orders involved.
pub fn one_point(alg: &TotalAlgebra, bf: &BfResult, beta: Lifted, gamma: &CohClass) -> Rational {
    bf.j.get(&beta)
        .and_then(|v| v.get(&-2))
        .map_or_else(Rational::zero, |x| alg.pairing(gamma, &CohClass(x.clone())))
}

/// Divisor-axiom cross-check: for divisors T_a, T_ν,
/// ⟨T_a, T_ν, T^κ⟩_β = (T_a.β)(T_ν.β)⟨T^κ⟩_β. Returns failing invariants.
pub fn divisor_axiom_failures(alg: &TotalAlgebra, geo: &Geometry, inv: &[Invariant], bf: &BfResult) -> Vec<Invariant> {
    let ctx = OpCtx::new(geo);
    let dir_of_basis = |k: usize| -> Option<Dir> { ctx.dirs.iter().copied().find(|&d| alg.dir_class(d) == alg.basis_class(k)) };
    inv.iter()
        .filter(|iv| !iv.flagged)
        .filter_map(|iv| {
            let dn = dir_of_basis(iv.nu)?;
            let l = lifted_coords(geo, &iv.class);
            let one = one_point(alg, bf, l, &alg.dual(iv.kappa));
            let want = Rational::from_i64(ctx.pairing(iv.dir, &iv.class) * ctx.pairing(dn, &iv.class)).times(&one);
            (want != iv.value).then(|| iv.clone())
        })
        .collect()
}

/// Outcome of the flop comparison of gauges and mirror maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FlopGaugeReport {
    /// First (weight, z-degree, row, col) where Φ·𝒯B ≠ B′·P.
    pub b_mismatch: Option<(Weight, i32, usize, usize)>,
    /// First (weight, component) where Φ·𝒯τ ≠ τ′.
    pub tau_mismatch: Option<(Weight, usize)>,
    pub parts_checked: usize,
}

impl FlopGaugeReport {
    pub fn pass(&self) -> bool {
        self.b_mismatch.is_none() && self.tau_mismatch.is_none()
    }
}

/// Φ·𝒯B = B′·P and Φ·𝒯τ = τ′, where Φ is the flop on cohomology and P the
/// operator gauge between the two column bases.
pub fn check_flop_invariance(geo: &Geometry, g: &Gauge, gp: &Gauge, p: &CMatrix) -> Result<FlopGaugeReport, BirkhoffError> {
    let alg = TotalAlgebra::new(geo);
    let algp = TotalAlgebra::new(&geo.mirror());
    let phi = alg.flop_matrix(&algp);
    let k = flop_u_shift(geo);
    let bound = (g.bound.0.min(gp.bound.0), g.bound.1.min(gp.bound.1));
    let pg = Graded::from_cmatrix(p, bound)?;
    let lhs = g.b.flop(k).left_const(&phi);
    let rhs = gp.b.mul(&pg);
    let trunc = |x: &Graded| -> BTreeMap<(Weight, i32), QMat> { x.parts.iter().filter(|(k, _)| leq(k.0, bound)).map(|(k, v)| (*k, v.clone())).collect() };
    let (l, r) = (trunc(&lhs), trunc(&rhs));
    let keys: BTreeSet<(Weight, i32)> = l.keys().chain(r.keys()).copied().collect();
    let n = g.b.n;
    let z = qzero(n);
    let mut b_mismatch = None;
    'outer: for key in &keys {
        let (x, y) = (l.get(key).unwrap_or(&z), r.get(key).unwrap_or(&z));
        for i in 0..n {
            for j in 0..n {
                if x[i][j] != y[i][j] {
                    b_mismatch = Some((key.0, key.1, i, j));
                    break 'outer;
                }
            }
        }
    }
    let mut tau_mismatch = None;
    let ws: BTreeSet<Weight> = g.tau.keys().chain(gp.tau.keys()).copied().filter(|w| leq(*w, bound)).collect();
    let zero = vec![RatFuncQ1::zero(); n];
    'tau: for w in ws {
        let t = g.tau.get(&w).unwrap_or(&zero);
        let sh = RatFuncQ1::x_pow(w.1 + k * w.0);
        let ft: Vec<RatFuncQ1> = t.iter().map(|f| f.substitute_inverse().times(&sh)).collect();
        let tp = gp.tau.get(&w).unwrap_or(&zero);
        for (i, row) in phi.iter().enumerate() {
            let v = row.iter().zip(&ft).fold(RatFuncQ1::zero(), |acc, (c, f)| acc.plus(&f.times(&RatFuncQ1::constant(c.clone()))));
            if v != tp[i] {
                tau_mismatch = Some((w, i));
                break 'tau;
            }
        }
    }
    Ok(FlopGaugeReport { b_mismatch, tau_mismatch, parts_checked: keys.len() })
}

/// τ_β as cohomology classes, for display.
pub fn tau_classes(bf: &BfResult) -> BTreeMap<Lifted, CohClass> {
    bf.tau.iter().map(|(b, v)| (*b, CohClass(v.clone()))).collect()
}

/// Applies Φ to a class; helper for callers comparing mirror maps by hand.
pub fn flop_class(phi: &[Vec<Rational>], c: &CohClass) -> CohClass {
    apply_matrix(phi, c)
}

#[cfg(test)]
mod tests;
