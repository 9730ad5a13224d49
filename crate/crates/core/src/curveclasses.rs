//! Curve classes β = β_S + dℓ + d₂γ, effectivity tests, lifts and lengths.

use crate::geometry::Geometry;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CurveClass {
    pub beta_s: Vec<i64>,
    pub d: i64,
    pub d2: i64,
}

impl CurveClass {
    pub fn new(beta_s: Vec<i64>, d: i64, d2: i64) -> Self {
        CurveClass { beta_s, d, d2 }
    }
    pub fn zero(ngens: usize) -> Self {
        CurveClass::new(vec![0; ngens], 0, 0)
    }
    pub fn plus(&self, o: &Self) -> Self {
        CurveClass::new(
            self.beta_s.iter().zip(&o.beta_s).map(|(a, b)| a + b).collect(),
            self.d + o.d,
            self.d2 + o.d2,
        )
    }
    pub fn minus(&self, o: &Self) -> Self {
        CurveClass::new(
            self.beta_s.iter().zip(&o.beta_s).map(|(a, b)| a - b).collect(),
            self.d - o.d,
            self.d2 - o.d2,
        )
    }
    pub fn is_zero(&self) -> bool {
        self.d == 0 && self.d2 == 0 && self.beta_s.iter().all(|&x| x == 0)
    }
    /// Total base degree Σ β_S.
    pub fn base_degree(&self) -> i64 {
        self.beta_s.iter().sum()
    }
}

/// Intersection numbers of β with the linear factors and ξ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Intersections {
    /// a_i.β = d + μ_i
    pub a: Vec<i64>,
    /// b_i.β = d₂ − d + μ′_i
    pub b: Vec<i64>,
    /// ξ.β = d₂
    pub xi: i64,
}

pub fn intersections(geo: &Geometry, beta: &CurveClass) -> Intersections {
    let mu = geo.mu(&beta.beta_s);
    let mup = geo.mu_p(&beta.beta_s);
    Intersections {
        a: mu.iter().map(|m| beta.d + m).collect(),
        b: mup.iter().map(|m| beta.d2 - beta.d + m).collect(),
        xi: beta.d2,
    }
}

/// Lengths n_i = −a_i.β, n′_i = −b_i.β, n′_{r+1} = −ξ.β.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LengthData {
    pub n: Vec<i64>,
    pub np: Vec<i64>,
    pub n_xi: i64,
}

pub fn lengths(geo: &Geometry, beta: &CurveClass) -> LengthData {
    let it = intersections(geo, beta);
    LengthData {
        n: it.a.iter().map(|x| -x).collect(),
        np: it.b.iter().map(|x| -x).collect(),
        n_xi: -it.xi,
    }
}

/// All lengths non-negative. For a single bundle only the n_i matter.
pub fn admissible(geo: &Geometry, beta: &CurveClass) -> bool {
    let l = lengths(geo, beta);
    l.n.iter().all(|&x| x >= 0)
        && (!geo.is_double() || (l.np.iter().all(|&x| x >= 0) && l.n_xi >= 0))
}

/// β_S − μ^I ℓ − ν^I γ.
pub fn i_minimal_lift(geo: &Geometry, beta_s: &[i64]) -> CurveClass {
    CurveClass::new(beta_s.to_vec(), -geo.mu_i(beta_s), -geo.nu_i(beta_s))
}

/// β^I − δℓ with δ = −(μ^I + μ′^I) when that is positive, else β^I.
pub fn twisted_lift(geo: &Geometry, beta_s: &[i64]) -> CurveClass {
    let mut b = i_minimal_lift(geo, beta_s);
    let s = geo.mu_i(beta_s) + geo.mu_p_i(beta_s);
    if geo.is_double() && s < 0 {
        b.d += s;
    }
    b
}

pub fn is_i_effective(geo: &Geometry, beta: &CurveClass) -> bool {
    beta.beta_s.iter().all(|&x| x >= 0)
        && beta.d >= -geo.mu_i(&beta.beta_s)
        && beta.d2 >= -geo.nu_i(&beta.beta_s)
        && (geo.is_double() || beta.d2 == 0)
}

pub fn is_ti_effective(geo: &Geometry, beta: &CurveClass) -> bool {
    beta.beta_s.iter().all(|&x| x >= 0)
        && beta.d + geo.mu_i(&beta.beta_s) >= 0
        && beta.d2 - beta.d + geo.mu_p_i(&beta.beta_s) >= 0
}

/// 𝒯β = β_S − dℓ′ + d₂(γ′ + ℓ′).
pub fn flop_push(beta: &CurveClass) -> CurveClass {
    CurveClass::new(beta.beta_s.clone(), beta.d2 - beta.d, beta.d2)
}

/// λ_β = c₁(X/S).β.
pub fn lambda(geo: &Geometry, beta: &CurveClass) -> i64 {
    let it = intersections(geo, beta);
    let s: i64 = it.a.iter().sum::<i64>() + if geo.is_double() { it.b.iter().sum::<i64>() + it.xi } else { 0 };
    s
}

/// One primitive component C_j of a decomposition β_S = Σ n_j C_j, with the
/// per-component maxima μ_{C_j}, μ′_{C_j}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub n: i64,
    pub mu: i64,
    pub mu_p: i64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LiftError {
    #[error("component multiplicities must be positive")]
    NonEffective,
}

/// β_S − μℓ − νγ with μ = Σ n_j μ_{C_j}, ν = Σ n_j max(μ_{C_j} + μ′_{C_j}, 0).
pub fn geometric_minimal_lift(beta_s: &[i64], parts: &[Component]) -> Result<CurveClass, LiftError> {
    if parts.iter().any(|c| c.n <= 0) {
        return Err(LiftError::NonEffective);
    }
    let mu: i64 = parts.iter().map(|c| c.n * c.mu).sum();
    let nu: i64 = parts.iter().map(|c| c.n * (c.mu + c.mu_p).max(0)).sum();
    Ok(CurveClass::new(beta_s.to_vec(), -mu, -nu))
}

/// Componentwise order on weights w = (β_S, d₂): all w′ ≤ w with w′ ≥ (0, lo).
pub fn weights_below(beta_s: &[i64], d2: i64, d2_lo: i64) -> Vec<(Vec<i64>, i64)> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; beta_s.len()];
    loop {
        for e in d2_lo..=d2 {
            out.push((cur.clone(), e));
        }
        let mut k = 0;
        loop {
            if k == cur.len() {
                return out;
            }
            if cur[k] < beta_s[k] {
                cur[k] += 1;
                break;
            }
            cur[k] = 0;
            k += 1;
        }
    }
}
