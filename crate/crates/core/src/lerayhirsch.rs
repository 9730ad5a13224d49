//! Lifted base quantum differential equation, the first-order connection
//! matrices C_a over the naive quantizations ∂^{zε}, and flop naturality.

use crate::cohring::{Dir, TotalAlgebra};
use crate::curveclasses::{admissible, i_minimal_lift, lengths, twisted_lift, CurveClass};
use crate::exactalg::{birat_u_series, q1rat_birat, u_birat, CoeffElem, Field, RatFuncQ1};
use crate::geometry::Geometry;
use crate::ifunc::SeriesI;
use crate::pfsystem::{apply, in_f_ring, pf_rules, DiffOp, OpCtx, PfError, Reducer, Rule};
use crate::scenario::LiftChoice;
use rayon::prelude::*;
use std::collections::HashMap;

/// Rows κ, columns ε: z∂_a(∂^{zε}I) = Σ_κ C[κ][ε] ∂^{zκ}I.
pub type CMatrix = Vec<Vec<CoeffElem>>;

/// z∂_{t̄ⁱ}(z∂_{t¹})^l(z∂_{t²})^m for T_ε = T̄_i h^l ξ^m.
pub fn naive_quantization(alg: &TotalAlgebra, eps: usize) -> DiffOp {
    DiffOp::monomial(alg.basis_monomial(eps))
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LhError {
    #[error("class {0:?} is not admissible")]
    NotAdmissible(CurveClass),
    #[error(transparent)]
    Pf(#[from] PfError),
}

/// D_β(z) = ∏_i∏_{m<n_i}(z∂_{a_i} − mz) ∏_i∏_{m<n′_i}(z∂_{b_i} − mz) ∏_{m<n′_{r+1}}(z∂_ξ − mz).
pub fn d_operator(ctx: &OpCtx, alg: &TotalAlgebra, geo: &Geometry, beta: &CurveClass) -> Result<DiffOp, LhError> {
    if !admissible(geo, beta) {
        return Err(LhError::NotAdmissible(beta.clone()));
    }
    let ld = lengths(geo, beta);
    let mut factors = Vec::new();
    for (i, &n) in ld.n.iter().enumerate() {
        factors.push((ctx.divisor_op(alg, &alg.a_class(i)), n));
    }
    if geo.is_double() {
        for (i, &n) in ld.np.iter().enumerate() {
            factors.push((ctx.divisor_op(alg, &alg.b_class(i)), n));
        }
        factors.push((ctx.divisor_op(alg, &alg.xi()), ld.n_xi));
    }
    let mut op = DiffOp::one(ctx.n());
    for (f, n) in factors {
        for m in 0..n {
            let sh = DiffOp::constant(ctx.n(), CoeffElem::z().times(&CoeffElem::from_int(-m)));
            op = op.compose(ctx, &f.plus(&sh));
        }
    }
    Ok(op)
}

/// (z∂_p)² I = q^{β*}e^{D.β*} D_{β*}(z) I for the chosen admissible lift β*.
#[derive(Clone, Debug)]
pub struct LiftedRelation {
    pub lift: CurveClass,
    /// q^{β*}e^{D.β*} in the lifted variables u, q₁, q₂
    pub coeff: CoeffElem,
    pub d_op: DiffOp,
}

impl LiftedRelation {
    pub fn rule(&self, ctx: &OpCtx) -> Rule {
        let mut lead = vec![0; ctx.n()];
        lead[ctx.index(Dir::Base(0))] = 2;
        Rule { lead, rhs: self.d_op.scale_left(&self.coeff) }
    }
}

/// Lifted small QDE of the base; empty for a point.
pub fn lift_qde(ctx: &OpCtx, alg: &TotalAlgebra, geo: &Geometry, choice: LiftChoice) -> Result<Vec<LiftedRelation>, LhError> {
    if geo.base.ngens() == 0 {
        return Ok(Vec::new());
    }
    let g = geo.base_generator();
    let bi = i_minimal_lift(geo, &g);
    let lift = match choice {
        LiftChoice::Iminimal => bi.clone(),
        LiftChoice::Twisted => twisted_lift(geo, &g),
    };
    let d_op = d_operator(ctx, alg, geo, &lift)?;
    let coeff = CoeffElem::monomial(0, (lift.d2 - bi.d2) as i32, q1rat_birat(RatFuncQ1::x_pow(lift.d - bi.d)).times(&u_birat()));
    Ok(vec![LiftedRelation { lift, coeff, d_op }])
}

/// The first-order system in all directions of `OpCtx::dirs`.
#[derive(Clone, Debug)]
pub struct Connection {
    pub dirs: Vec<Dir>,
    pub mats: Vec<CMatrix>,
    pub lift: Option<CurveClass>,
}

impl Connection {
    pub fn matrix(&self, d: Dir) -> &CMatrix {
        &self.mats[self.dirs.iter().position(|&x| x == d).unwrap()]
    }
}

/// Reduces z∂_a ∂^{zε} for every direction and basis element.
pub fn assemble_connection(geo: &Geometry, choice: LiftChoice) -> Result<Connection, LhError> {
    let alg = TotalAlgebra::new(geo);
    let ctx = OpCtx::new(geo);
    let lifted = lift_qde(&ctx, &alg, geo, choice)?;
    let mut rules: Vec<Rule> = lifted.iter().map(|l| l.rule(&ctx)).collect();
    rules.extend(pf_rules(&ctx, &alg));
    let red = Reducer { ctx: &ctx, rules };
    let n = alg.rank();
    let mono_index: HashMap<Vec<u32>, usize> = (0..n).map(|k| (alg.basis_monomial(k), k)).collect();
    let mut targets = Vec::new();
    for a in 0..ctx.n() {
        for e in 0..n {
            let mut m = alg.basis_monomial(e);
            m[a] += 1;
            targets.push(m);
        }
    }
    let forms = red.reduce(&targets)?;
    let mut mats = vec![vec![vec![CoeffElem::zero(); n]; n]; ctx.n()];
    for (t, f) in forms.into_iter().enumerate() {
        let (a, e) = (t / n, t % n);
        for (g, c) in f.terms {
            let k = mono_index[&g];
            mats[a][k][e] = c;
        }
    }
    Ok(Connection { dirs: ctx.dirs.clone(), mats, lift: lifted.first().map(|l| l.lift.clone()) })
}

/// Entries of C_a at q₁ = q₂ = u = 0.
pub fn classical_limit(m: &CMatrix) -> Vec<Vec<CoeffElem>> {
    m.iter()
        .map(|row| {
            row.iter()
                .map(|c| {
                    let mut r = CoeffElem::zero();
                    for t in c.expand(0, 0) {
                        if t.u == 0 && t.q1 == 0 && t.q2 == 0 {
                            r.add_assign(&CoeffElem::from_rational(t.c).shift(t.z, 0));
                        }
                    }
                    r
                })
                .collect()
        })
        .collect()
}

/// One failed soundness check: direction, basis column, offending classes.
#[derive(Clone, Debug)]
pub struct SystemFailure {
    pub dir: Dir,
    pub eps: usize,
    pub classes: Vec<CurveClass>,
}

/// z∂_a(∂^{zε}I) = Σ_κ C_a[κ][ε] ∂^{zκ}I on the box of `i`.
pub fn check_system(geo: &Geometry, conn: &Connection, i: &SeriesI) -> (Vec<SystemFailure>, usize) {
    let alg = TotalAlgebra::new(geo);
    let ctx = OpCtx::new(geo);
    let n = alg.rank();
    let jobs: Vec<(usize, usize)> = (0..ctx.n()).flat_map(|a| (0..n).map(move |e| (a, e))).collect();
    let res: Vec<(Option<SystemFailure>, usize)> = jobs
        .par_iter()
        .map(|&(a, e)| {
            let mut m = alg.basis_monomial(e);
            m[a] += 1;
            let lhs = apply(&ctx, &alg, geo, &DiffOp::monomial(m), i);
            let mut op = DiffOp::zero();
            for k in 0..n {
                op.add_term(alg.basis_monomial(k), &conn.mats[a][k][e]);
            }
            let rhs = apply(&ctx, &alg, geo, &op, i);
            let bad = lhs.agrees_with(&rhs);
            let checked = lhs.terms.keys().filter(|b| !lhs.boundary.contains(*b) && !rhs.boundary.contains(*b)).count();
            let f = (!bad.is_empty()).then(|| SystemFailure { dir: ctx.dirs[a], eps: e, classes: bad });
            (f, checked)
        })
        .collect();
    let checked = res.iter().map(|r| r.1).sum();
    (res.into_iter().filter_map(|r| r.0).collect(), checked)
}

/// Mismatch found by the naturality check.
#[derive(Clone, Debug, PartialEq)]
pub struct NaturalityFailure {
    pub dir: Dir,
    pub row: usize,
    pub col: usize,
    pub lhs: String,
    pub rhs: String,
}

/// The X′ gauge P: column ε is the X′-normal form of 𝒯∂^{zε} =
/// (z∂_{ξ′} − z∂_{h′})^l (z∂_{ξ′})^m z∂_{t̄ⁱ}.
pub fn flop_gauge(geo: &Geometry, choice: LiftChoice) -> Result<CMatrix, LhError> {
    let gp = geo.mirror();
    let alg = TotalAlgebra::new(geo);
    let algp = TotalAlgebra::new(&gp);
    let ctxp = OpCtx::new(&gp);
    let lifted = lift_qde(&ctxp, &algp, &gp, choice)?;
    let mut rules: Vec<Rule> = lifted.iter().map(|l| l.rule(&ctxp)).collect();
    rules.extend(pf_rules(&ctxp, &algp));
    let red = Reducer { ctx: &ctxp, rules };
    let n = alg.rank();
    let ih = ctxp.index(Dir::H);
    let mut th = DiffOp::monomial(ctxp.unit(Dir::Xi));
    th.add_term(ctxp.unit(Dir::H), &CoeffElem::from_int(-1));
    let mut ops = Vec::new();
    for e in 0..n {
        let m = alg.basis_monomial(e);
        let mut rest = m.clone();
        rest[ih] = 0;
        let mut op = DiffOp::monomial(rest);
        for _ in 0..m[ih] {
            op = op.compose(&ctxp, &th);
        }
        ops.push(op);
    }
    let mut needed: Vec<Vec<u32>> = ops.iter().flat_map(|o| o.terms.keys().cloned()).collect();
    needed.sort();
    needed.dedup();
    let forms = red.reduce(&needed)?;
    let nf: HashMap<Vec<u32>, DiffOp> = needed.into_iter().zip(forms).collect();
    let mono_index: HashMap<Vec<u32>, usize> = (0..n).map(|k| (algp.basis_monomial(k), k)).collect();
    let mut p = vec![vec![CoeffElem::zero(); n]; n];
    for (e, op) in ops.iter().enumerate() {
        for (g, c) in &op.terms {
            for (h, d) in &nf[g].terms {
                p[mono_index[h]][e].add_assign(&c.times(d));
            }
        }
    }
    Ok(p)
}

fn mat_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = CoeffElem::zero();
                    for k in 0..n {
                        if !a[i][k].is_zero() && !b[k][j].is_zero() {
                            s.add_assign(&a[i][k].times(&b[k][j]));
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// The u-exponent correction k in 𝒯u = u′ q₁′^k.
pub fn flop_u_shift(geo: &Geometry) -> i64 {
    let g = geo.base_generator();
    if g.is_empty() {
        0
    } else {
        (geo.mu_i(&g) + geo.mu_p_i(&g)).min(0)
    }
}

/// Verifies P·𝒯(C_a) = z∂_{𝒯a}P + C′_{𝒯a}P entrywise in the exact field,
/// where 𝒯 substitutes q₁ ↦ 1/q₁, q₂ ↦ q₁q₂, u ↦ u q₁^k, h ↦ ξ′ − h′, ξ ↦ ξ′.
pub fn check_naturality(geo: &Geometry, conn: &Connection, connp: &Connection, p: &CMatrix) -> Vec<NaturalityFailure> {
    let gp = geo.mirror();
    let ctxp = OpCtx::new(&gp);
    let k = flop_u_shift(geo);
    let n = p.len();
    let mut fails = Vec::new();
    for (ai, &dir) in conn.dirs.iter().enumerate() {
        // 𝒯a as a combination of X′ directions
        let combo: Vec<(usize, i64)> = match dir {
            Dir::H => vec![(ctxp.index(Dir::Xi), 1), (ctxp.index(Dir::H), -1)],
            d => vec![(ctxp.index(d), 1)],
        };
        let tc: CMatrix = conn.mats[ai].iter().map(|row| row.iter().map(|c| c.flop_substitute(k)).collect()).collect();
        let lhs = mat_mul(p, &tc);
        let mut cp = vec![vec![CoeffElem::zero(); n]; n];
        let mut dp = vec![vec![CoeffElem::zero(); n]; n];
        for &(j, s) in &combo {
            let sc = CoeffElem::from_int(s);
            for r in 0..n {
                for c in 0..n {
                    cp[r][c].add_assign(&connp.mats[j][r][c].times(&sc));
                    if !p[r][c].is_zero() {
                        dp[r][c].add_assign(&p[r][c].derive(&ctxp.weights[j]).shift(1, 0).times(&sc));
                    }
                }
            }
        }
        let rhs = mat_mul(&cp, p);
        for r in 0..n {
            for c in 0..n {
                let rv = rhs[r][c].plus(&dp[r][c]);
                if lhs[r][c] != rv {
                    fails.push(NaturalityFailure { dir, row: r, col: c, lhs: lhs[r][c].render(), rhs: rv.render() });
                }
            }
        }
    }
    fails
}

/// Whether every entry, expanded to u^max_u, has coefficients in
/// ℚ[z, q₂, q₁, 𝕗] at each fixed u-power.
pub fn entries_in_coefficient_ring(m: &CMatrix, r: usize, max_u: i64) -> bool {
    m.iter().flatten().all(|c| {
        c.terms().iter().all(|(k, v)| {
            k.0 >= 0 && k.1 >= 0 && birat_u_series(v, max_u).iter().all(|(s, f)| *s >= 0 && in_f_ring(f, r))
        })
    })
}

/// Replaces entry (row, col) of direction `d` by itself plus `delta`.
pub fn perturb(conn: &Connection, d: Dir, row: usize, col: usize, delta: &CoeffElem) -> Connection {
    let mut c = conn.clone();
    let ai = c.dirs.iter().position(|&x| x == d).unwrap();
    c.mats[ai][row][col] = c.mats[ai][row][col].plus(delta);
    c
}
