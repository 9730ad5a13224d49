//! Differential operators in z∂ along divisor directions, the Picard–Fuchs
//! pair (□_ℓ, □_γ), their action on truncated I, and normal-form reduction
//! of derivative monomials modulo a set of leading-term rules.

use crate::cohring::{CohClass, Dir, TotalAlgebra};
use crate::curveclasses::CurveClass;
use crate::exactalg::{f_basic, q1rat_birat, qi, BiRat, CoeffElem, Field, RatFuncQ1, VarWeights};
use crate::geometry::Geometry;
use crate::ifunc::{class_of_lifted, lifted_coords, SeriesI, ZSeries};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// Derivation directions of a scenario together with the weights by which
/// each direction acts on the Novikov variables q₁, q₂, u.
#[derive(Clone, Debug)]
pub struct OpCtx {
    pub dirs: Vec<Dir>,
    pub weights: Vec<VarWeights>,
    pub r: usize,
    pub double: bool,
}

impl OpCtx {
    pub fn new(geo: &Geometry) -> Self {
        let g = geo.base_generator();
        let (mu, nu) = if g.is_empty() { (0, 0) } else { (geo.mu_i(&g), geo.nu_i(&g)) };
        let mut dirs = vec![Dir::H];
        let mut weights = vec![VarWeights { q1: 1, q2: 0, u: -mu }];
        if geo.is_double() {
            dirs.push(Dir::Xi);
            weights.push(VarWeights { q1: 0, q2: 1, u: -nu });
        }
        for k in 0..geo.base.ngens() {
            dirs.push(Dir::Base(k));
            weights.push(VarWeights { q1: 0, q2: 0, u: 1 });
        }
        OpCtx { dirs, weights, r: geo.r, double: geo.is_double() }
    }

    pub fn n(&self) -> usize {
        self.dirs.len()
    }

    pub fn index(&self, d: Dir) -> usize {
        self.dirs.iter().position(|&x| x == d).expect("direction present")
    }

    pub fn unit(&self, d: Dir) -> Vec<u32> {
        let mut v = vec![0; self.n()];
        v[self.index(d)] = 1;
        v
    }

    /// z∂_v for a divisor class v.
    pub fn divisor_op(&self, alg: &TotalAlgebra, v: &CohClass) -> DiffOp {
        let mut op = DiffOp::zero();
        let mut rest = v.clone();
        for &d in &self.dirs {
            let dc = alg.dir_class(d);
            let k = dc.0.iter().position(|x| !x.is_zero()).unwrap();
            let c = v.0[k].clone();
            if !c.is_zero() {
                op.add_term(self.unit(d), &CoeffElem::from_rational(c.clone()));
                rest = rest.minus(&dc.scale(&c));
            }
        }
        assert!(rest.is_zero(), "not a divisor class");
        op
    }

    /// Value v.β of direction d on a curve class.
    pub fn pairing(&self, d: Dir, beta: &CurveClass) -> i64 {
        match d {
            Dir::H => beta.d,
            Dir::Xi => beta.d2,
            Dir::Base(g) => beta.beta_s[g],
        }
    }

    fn label(&self, i: usize) -> String {
        match self.dirs[i] {
            Dir::H => "z∂h".into(),
            Dir::Xi => "z∂ξ".into(),
            Dir::Base(0) if self.dirs.len() - if self.double { 2 } else { 1 } == 1 => "z∂p".into(),
            Dir::Base(g) => format!("z∂p{g}"),
        }
    }
}

/// Σ c_α (z∂)^α with all coefficients to the left of the derivatives.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DiffOp {
    pub terms: BTreeMap<Vec<u32>, CoeffElem>,
}

fn binom(n: u32, k: u32) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

impl DiffOp {
    pub fn zero() -> Self {
        DiffOp { terms: BTreeMap::new() }
    }
    pub fn constant(n: usize, c: CoeffElem) -> Self {
        let mut op = Self::zero();
        op.add_term(vec![0; n], &c);
        op
    }
    pub fn one(n: usize) -> Self {
        Self::constant(n, CoeffElem::one())
    }
    pub fn monomial(alpha: Vec<u32>) -> Self {
        let mut op = Self::zero();
        op.add_term(alpha, &CoeffElem::one());
        op
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn add_term(&mut self, alpha: Vec<u32>, c: &CoeffElem) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(alpha.clone()).or_insert_with(CoeffElem::zero);
        e.add_assign(c);
        if e.is_zero() {
            self.terms.remove(&alpha);
        }
    }
    pub fn plus(&self, o: &DiffOp) -> DiffOp {
        let mut r = self.clone();
        for (a, c) in &o.terms {
            r.add_term(a.clone(), c);
        }
        r
    }
    pub fn negate(&self) -> DiffOp {
        DiffOp { terms: self.terms.iter().map(|(a, c)| (a.clone(), c.negate())).collect() }
    }
    pub fn minus(&self, o: &DiffOp) -> DiffOp {
        self.plus(&o.negate())
    }
    /// c·self with c on the left.
    pub fn scale_left(&self, c: &CoeffElem) -> DiffOp {
        let mut r = DiffOp::zero();
        for (a, x) in &self.terms {
            r.add_term(a.clone(), &c.times(x));
        }
        r
    }
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|a| a.iter().sum()).max()
    }
    pub fn coeff(&self, alpha: &[u32]) -> CoeffElem {
        self.terms.get(alpha).cloned().unwrap_or_else(CoeffElem::zero)
    }

    /// self ∘ o, normal ordered by (z∂)^n g = Σ_k C(n,k) z^k (∂^k g)(z∂)^{n−k}.
    pub fn compose(&self, ctx: &OpCtx, o: &DiffOp) -> DiffOp {
        let mut out = DiffOp::zero();
        let mut dcache: HashMap<(Vec<u32>, Vec<u32>), CoeffElem> = HashMap::new();
        for (alpha, f) in &self.terms {
            for delta in sub_multi_indices(alpha) {
                let mut bin: i64 = 1;
                for (a, d) in alpha.iter().zip(&delta) {
                    bin *= binom(*a, *d);
                }
                let zk: u32 = delta.iter().sum();
                let rest: Vec<u32> = alpha.iter().zip(&delta).map(|(a, d)| a - d).collect();
                for (beta, g) in &o.terms {
                    let dg = dcache
                        .entry((delta.clone(), beta.clone()))
                        .or_insert_with(|| derive_multi(ctx, g, &delta))
                        .clone();
                    if dg.is_zero() {
                        continue;
                    }
                    let c = f.times(&dg).shift(zk as i32, 0).times(&CoeffElem::from_int(bin));
                    let tot: Vec<u32> = rest.iter().zip(beta).map(|(a, b)| a + b).collect();
                    out.add_term(tot, &c);
                }
            }
        }
        out
    }

    /// Renders as "c·(z∂h)^2(z∂ξ) + …".
    pub fn render(&self, ctx: &OpCtx) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (a, c) in self.terms.iter().rev() {
            let mut m = String::new();
            for (i, &e) in a.iter().enumerate() {
                match e {
                    0 => {}
                    1 => m.push_str(&format!("({})", ctx.label(i))),
                    _ => m.push_str(&format!("({})^{e}", ctx.label(i))),
                }
            }
            let cs = c.render();
            parts.push(if m.is_empty() {
                cs
            } else if c.is_one() {
                m
            } else {
                format!("({cs}){m}")
            });
        }
        parts.join(" + ")
    }
}

/// ∂^δ g with ∂_i acting through the direction weights.
pub fn derive_multi(ctx: &OpCtx, g: &CoeffElem, delta: &[u32]) -> CoeffElem {
    let mut r = g.clone();
    for (i, &k) in delta.iter().enumerate() {
        for _ in 0..k {
            if r.is_zero() {
                return r;
            }
            r = r.derive(&ctx.weights[i]);
        }
    }
    r
}

fn sub_multi_indices(a: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &x in a {
        let mut nxt = Vec::new();
        for v in &out {
            for k in 0..=x {
                let mut w = v.clone();
                w.push(k);
                nxt.push(w);
            }
        }
        out = nxt;
    }
    out
}

/// ∏ of the z∂ along the given divisor classes.
pub fn product_op(ctx: &OpCtx, alg: &TotalAlgebra, classes: &[CohClass]) -> DiffOp {
    let mut op = DiffOp::one(ctx.n());
    for c in classes {
        op = op.compose(ctx, &ctx.divisor_op(alg, c));
    }
    op
}

/// (□_ℓ, □_γ); □_γ is None for a single bundle, where □_ℓ = ∏ z∂_{a_j} − q₁.
pub fn build_pf(ctx: &OpCtx, alg: &TotalAlgebra) -> (DiffOp, Option<DiffOp>) {
    let a: Vec<CohClass> = (0..=ctx.r).map(|i| alg.a_class(i)).collect();
    let pa = product_op(ctx, alg, &a);
    if !ctx.double {
        return (pa.minus(&DiffOp::constant(ctx.n(), CoeffElem::q1())), None);
    }
    let b: Vec<CohClass> = (0..=ctx.r).map(|i| alg.b_class(i)).collect();
    let pb = product_op(ctx, alg, &b);
    let box_l = pa.minus(&pb.scale_left(&CoeffElem::q1()));
    let box_g = ctx
        .divisor_op(alg, &alg.xi())
        .compose(ctx, &pb)
        .minus(&DiffOp::constant(ctx.n(), CoeffElem::q2()));
    (box_l, Some(box_g))
}

/// Result of applying an operator to truncated I: values on the box and the
/// classes whose value needed data outside the box.
#[derive(Clone, Debug, Default)]
pub struct Applied {
    pub terms: BTreeMap<CurveClass, ZSeries>,
    pub boundary: BTreeSet<CurveClass>,
}

impl Applied {
    /// Classes off the boundary with a nonzero value.
    pub fn nonzero_resolved(&self) -> Vec<CurveClass> {
        self.terms.iter().filter(|(b, v)| !v.is_zero() && !self.boundary.contains(*b)).map(|(b, _)| b.clone()).collect()
    }
    pub fn agrees_with(&self, o: &Applied) -> Vec<CurveClass> {
        let keys: BTreeSet<&CurveClass> = self.terms.keys().chain(o.terms.keys()).collect();
        let z = ZSeries::zero();
        keys.into_iter()
            .filter(|b| !self.boundary.contains(*b) && !o.boundary.contains(*b))
            .filter(|b| self.terms.get(*b).unwrap_or(&z) != o.terms.get(*b).unwrap_or(&z))
            .cloned()
            .collect()
    }
}

/// ∂^α I on every stored class: z∂_v multiplies the β-term by v + z(v.β).
pub fn derivative_series(ctx: &OpCtx, alg: &TotalAlgebra, alpha: &[u32], i: &SeriesI) -> BTreeMap<CurveClass, ZSeries> {
    i.terms
        .par_iter()
        .map(|(b, v)| {
            let mut s = v.clone();
            for (k, &e) in alpha.iter().enumerate() {
                let d = ctx.dirs[k];
                let mut f = ZSeries::monomial(0, alg.dir_class(d));
                f.add_term(1, &alg.one().scale(&qi(ctx.pairing(d, b))));
                for _ in 0..e {
                    s = f.mul(alg, &s);
                }
            }
            (b.clone(), s)
        })
        .collect()
}

/// Exact action of a DiffOp on truncated I over the whole box.
pub fn apply(ctx: &OpCtx, alg: &TotalAlgebra, geo: &Geometry, op: &DiffOp, i: &SeriesI) -> Applied {
    let bx = i.bx;
    let classes = bx.classes(geo);
    let mut out = Applied::default();
    for b in &classes {
        out.terms.insert(b.clone(), ZSeries::zero());
    }
    for (alpha, c) in &op.terms {
        let da = derivative_series(ctx, alg, alpha, i);
        let terms = c.expand(bx.bs, bx.dmax);
        for b in &classes {
            let (s, e1, e2) = lifted_coords(geo, b);
            let acc = out.terms.get_mut(b).unwrap();
            for t in &terms {
                let src = (s - t.u, e1 - t.q1, e2 - t.q2);
                if src.0 < 0 || src.1 < 0 || src.2 < 0 {
                    continue;
                }
                if src.0 > bx.bs || src.1 > bx.dmax || src.2 > bx.d2 {
                    out.boundary.insert(b.clone());
                    continue;
                }
                let sc = class_of_lifted(geo, src.0, src.1, src.2);
                if let Some(v) = da.get(&sc) {
                    acc.add_scaled(&v.shift_z(t.z), &t.c);
                }
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PfError {
    #[error("leading coefficient of {0:?} is not invertible")]
    LeadNotUnit(Vec<u32>),
    #[error("input {0:?} is already canonical")]
    InRange(Vec<u32>),
    #[error("rewriting {0:?} raised the derivative degree")]
    DegreeIncrease(Vec<u32>),
    #[error("same-degree coefficient at {0:?} depends on z or q2")]
    NonScalarBlock(Vec<u32>),
    #[error("singular degree block at degree {0}")]
    Singular(u32),
    #[error("watchdog: closure exceeded {0} monomials")]
    Watchdog(usize),
}

/// ∂^lead I = rhs I.
#[derive(Clone, Debug)]
pub struct Rule {
    pub lead: Vec<u32>,
    pub rhs: DiffOp,
}

impl Rule {
    /// Solves a relation Σ c_γ ∂^γ = 0 for its `lead` monomial.
    pub fn from_relation(rel: &DiffOp, lead: Vec<u32>) -> Result<Rule, PfError> {
        let c = rel.coeff(&lead);
        let inv = c.as_birat().filter(|b| !b.is_zero()).ok_or_else(|| PfError::LeadNotUnit(lead.clone()))?;
        let f = CoeffElem::from_birat(inv.recip().negate());
        let mut rest = rel.clone();
        rest.terms.remove(&lead);
        Ok(Rule { lead, rhs: rest.scale_left(&f) })
    }
}

const CLOSURE_LIMIT: usize = 20000;

/// Normal forms of derivative monomials modulo rules tried in order.
pub struct Reducer<'a> {
    pub ctx: &'a OpCtx,
    pub rules: Vec<Rule>,
}

impl<'a> Reducer<'a> {
    pub fn is_canonical(&self, alpha: &[u32]) -> bool {
        self.rules.iter().all(|r| !le(&r.lead, alpha))
    }

    fn expand(&self, alpha: &[u32]) -> DiffOp {
        let r = self.rules.iter().find(|r| le(&r.lead, alpha)).unwrap();
        let rest: Vec<u32> = alpha.iter().zip(&r.lead).map(|(a, l)| a - l).collect();
        DiffOp::monomial(rest).compose(self.ctx, &r.rhs)
    }

    /// Normal form of every target, as operators over canonical monomials.
    pub fn reduce(&self, targets: &[Vec<u32>]) -> Result<Vec<DiffOp>, PfError> {
        let mut exp: HashMap<Vec<u32>, DiffOp> = HashMap::new();
        let mut queue: VecDeque<Vec<u32>> = targets.iter().filter(|a| !self.is_canonical(a)).cloned().collect();
        while let Some(a) = queue.pop_front() {
            if exp.contains_key(&a) {
                continue;
            }
            let e = self.expand(&a);
            let n: u32 = a.iter().sum();
            for g in e.terms.keys() {
                if g.iter().sum::<u32>() > n {
                    return Err(PfError::DegreeIncrease(a));
                }
                if !self.is_canonical(g) && !exp.contains_key(g) {
                    queue.push_back(g.clone());
                }
            }
            exp.insert(a, e);
            if exp.len() > CLOSURE_LIMIT {
                return Err(PfError::Watchdog(CLOSURE_LIMIT));
            }
        }
        let mut by_deg: BTreeMap<u32, Vec<Vec<u32>>> = BTreeMap::new();
        for a in exp.keys() {
            by_deg.entry(a.iter().sum()).or_default().push(a.clone());
        }
        let mut solved: HashMap<Vec<u32>, DiffOp> = HashMap::new();
        for (n, mut us) in by_deg {
            us.sort();
            let idx: HashMap<&Vec<u32>, usize> = us.iter().enumerate().map(|(k, a)| (a, k)).collect();
            let m = us.len();
            let mut mat: Vec<Vec<BiRat>> =
                (0..m).map(|i| (0..m).map(|j| if i == j { BiRat::one() } else { BiRat::zero() }).collect()).collect();
            let mut rhs: Vec<DiffOp> = vec![DiffOp::zero(); m];
            for (k, a) in us.iter().enumerate() {
                for (g, c) in &exp[a].terms {
                    if self.is_canonical(g) {
                        rhs[k].add_term(g.clone(), c);
                    } else if g.iter().sum::<u32>() == n {
                        let b = c.as_birat().ok_or_else(|| PfError::NonScalarBlock(a.clone()))?;
                        let j = idx[g];
                        mat[k][j] = mat[k][j].minus(&b);
                    } else {
                        rhs[k] = rhs[k].plus(&solved[g].scale_left(c));
                    }
                }
            }
            gauss_jordan(&mut mat, &mut rhs).ok_or(PfError::Singular(n))?;
            for (k, a) in us.into_iter().enumerate() {
                solved.insert(a, std::mem::take(&mut rhs[k]));
            }
        }
        Ok(targets
            .iter()
            .map(|a| if self.is_canonical(a) { DiffOp::monomial(a.clone()) } else { solved[a].clone() })
            .collect())
    }
}

fn le(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Solves mat·X = rhs in place (rhs becomes X); None when singular.
fn gauss_jordan(mat: &mut [Vec<BiRat>], rhs: &mut [DiffOp]) -> Option<()> {
    let m = mat.len();
    for c in 0..m {
        let p = (c..m).find(|&r| !mat[r][c].is_zero())?;
        mat.swap(c, p);
        rhs.swap(c, p);
        let pv = mat[c][c].recip();
        if !pv.is_one() {
            for j in c..m {
                mat[c][j] = mat[c][j].times(&pv);
            }
            rhs[c] = rhs[c].scale_left(&CoeffElem::from_birat(pv));
        }
        for r in 0..m {
            if r != c && !mat[r][c].is_zero() {
                let f = mat[r][c].clone();
                for j in c..m {
                    let t = mat[c][j].times(&f);
                    mat[r][j] = mat[r][j].minus(&t);
                }
                let t = rhs[c].scale_left(&CoeffElem::from_birat(f));
                rhs[r] = rhs[r].minus(&t);
            }
        }
    }
    Some(())
}

/// Rules from the Picard–Fuchs pair: h^{r+1} via □_ℓ, then ξ^{r+2} via □_γ.
pub fn pf_rules(ctx: &OpCtx, alg: &TotalAlgebra) -> Vec<Rule> {
    let (bl, bg) = build_pf(ctx, alg);
    let mut lead = vec![0; ctx.n()];
    lead[ctx.index(Dir::H)] = ctx.r as u32 + 1;
    let mut rules = vec![Rule::from_relation(&bl, lead).expect("□_ℓ lead is 1 ∓ q₁")];
    if let Some(bg) = bg {
        let mut lead = vec![0; ctx.n()];
        lead[ctx.index(Dir::Xi)] = ctx.r as u32 + 2;
        rules.push(Rule::from_relation(&bg, lead).expect("□_γ lead is 1"));
    }
    rules
}

/// (z∂_{t¹})^a (z∂_{t²})^b modulo the Picard–Fuchs ideal alone.
pub fn reduce_power(ctx: &OpCtx, alg: &TotalAlgebra, a: u32, b: u32) -> Result<DiffOp, PfError> {
    let mut alpha = vec![0; ctx.n()];
    alpha[0] = a;
    if ctx.double {
        alpha[1] = b;
    } else if b > 0 {
        return Err(PfError::InRange(alpha));
    }
    let red = Reducer { ctx, rules: pf_rules(ctx, alg) };
    if red.is_canonical(&alpha) {
        return Err(PfError::InRange(alpha));
    }
    Ok(red.reduce(&[alpha])?.remove(0))
}

/// Whether f ∈ ℚ[q₁, 𝕗]: its denominator is a power of 1 − (−1)^{r+1}q₁.
pub fn in_f_ring(f: &RatFuncQ1, r: usize) -> bool {
    let den = f.den();
    if den.deg() <= 0 {
        return true;
    }
    let base = f_basic(r as u32).den().clone();
    let k = den.deg() as u32;
    *den == base.pow(k)
}

/// Whether every coefficient of an operator lies in ℚ[z, q₂, q₁, 𝕗].
pub fn coefficients_in_f_ring(op: &DiffOp, r: usize) -> bool {
    op.terms.values().all(|c| {
        c.terms()
            .iter()
            .all(|(k, v)| k.0 >= 0 && k.1 >= 0 && v.as_constant().is_some_and(|f| in_f_ring(&f, r)))
    })
}

/// The flop substitution on operators: z∂_h ↦ z∂_{ξ′} − z∂_{h′}, z∂_ξ ↦ z∂_{ξ′},
/// base directions fixed, coefficients by q₁ ↦ 1/q₁, q₂ ↦ q₁q₂, u ↦ u q₁^k.
pub fn flop_op(ctx: &OpCtx, op: &DiffOp, k: i64) -> DiffOp {
    let ih = ctx.index(Dir::H);
    let mut th = DiffOp::monomial(ctx.unit(Dir::Xi));
    th.add_term(ctx.unit(Dir::H), &CoeffElem::from_int(-1));
    let mut out = DiffOp::zero();
    for (a, c) in &op.terms {
        let mut rest = a.clone();
        rest[ih] = 0;
        let mut t = DiffOp::monomial(rest);
        for _ in 0..a[ih] {
            t = t.compose(ctx, &th);
        }
        out = out.plus(&t.scale_left(&c.flop_substitute(k)));
    }
    out
}

/// Outcome of the operator-level flop identities.
#[derive(Clone, Debug)]
pub struct FlopPfReport {
    pub box_l: bool,
    pub box_g: bool,
    pub first_mismatch: Option<String>,
}

impl FlopPfReport {
    pub fn pass(&self) -> bool {
        self.box_l && self.box_g
    }
}

/// Checks 𝒯□_ℓ = −q₁′⁻¹□_{ℓ′} and 𝒯□_γ = z∂_{ξ′}□_{ℓ′} + q₁′□_{γ′} exactly.
/// With `identity` the substitution is skipped (negative control).
pub fn flop_pf_identities(geo: &Geometry, identity: bool) -> FlopPfReport {
    let gp = geo.mirror();
    let (x, xp) = (TotalAlgebra::new(geo), TotalAlgebra::new(&gp));
    let (c, cp) = (OpCtx::new(geo), OpCtx::new(&gp));
    let (bl, bg) = build_pf(&c, &x);
    let (blp, bgp) = build_pf(&cp, &xp);
    let (bg, bgp) = (bg.unwrap(), bgp.unwrap());
    let g = geo.base_generator();
    let k = if g.is_empty() { 0 } else { (geo.mu_i(&g) + geo.mu_p_i(&g)).min(0) };
    let t = |op: &DiffOp| if identity { op.clone() } else { flop_op(&cp, op, k) };
    let q1inv = CoeffElem::from_birat(q1rat_birat(RatFuncQ1::x_pow(-1)));
    let lhs_l = t(&bl);
    let rhs_l = blp.scale_left(&q1inv.negate());
    let lhs_g = t(&bg);
    let rhs_g = cp.divisor_op(&xp, &xp.xi()).compose(&cp, &blp).plus(&bgp.scale_left(&CoeffElem::q1()));
    let mut first = None;
    for (name, l, r) in [("□_ℓ", &lhs_l, &rhs_l), ("□_γ", &lhs_g, &rhs_g)] {
        if l != r && first.is_none() {
            let d = l.minus(r);
            let (a, v) = d.terms.iter().next().unwrap();
            first = Some(format!("{name}: term {a:?} differs by {}", v.render()));
        }
    }
    FlopPfReport { box_l: lhs_l == rhs_l, box_g: lhs_g == rhs_g, first_mismatch: first }
}
