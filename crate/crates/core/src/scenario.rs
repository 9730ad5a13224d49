//! Scenario data: geometry plus truncation box and run flags.

use crate::geometry::{BaseKind, Geometry, GeometryError};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncBox {
    /// Maximal base degree.
    pub bs: i64,
    /// Maximal γ-degree.
    pub d2: i64,
    /// Maximal ℓ-degree measured above the I-minimal lift.
    pub dmax: i64,
}

impl Default for TruncBox {
    fn default() -> Self {
        TruncBox { bs: 2, d2: 2, dmax: 6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LiftChoice {
    #[default]
    Iminimal,
    Twisted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(flatten)]
    pub geometry: Geometry,
    #[serde(default, rename = "box")]
    pub trunc: TruncBox,
    #[serde(default)]
    pub sign_twist: bool,
    #[serde(default)]
    pub lift: LiftChoice,
    /// Bound on the base-degree order of connection matrices.
    #[serde(default = "default_weight_bound")]
    pub weight_bound: i64,
}

fn default_weight_bound() -> i64 {
    2
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("box.{0} must be non-negative")]
    BadBox(&'static str),
    #[error("weight_bound must be non-negative")]
    BadWeightBound,
    #[error("{0}")]
    Restriction(String),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.geometry.validate()?;
        if self.trunc.bs < 0 {
            return Err(ScenarioError::BadBox("bs"));
        }
        if self.trunc.d2 < 0 {
            return Err(ScenarioError::BadBox("d2"));
        }
        if self.trunc.dmax < 0 {
            return Err(ScenarioError::BadBox("dmax"));
        }
        if self.weight_bound < 0 {
            return Err(ScenarioError::BadWeightBound);
        }
        Ok(())
    }

    /// The flopped scenario X′.
    pub fn mirror(&self) -> Scenario {
        Scenario {
            name: format!("{}'", self.name),
            geometry: self.geometry.mirror(),
            ..self.clone()
        }
    }

    pub fn from_json(s: &str) -> Result<Scenario, String> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| e.to_string())?;
        sc.validate().map_err(|e| e.to_string())?;
        Ok(sc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn make(name: &str, r: usize, base: BaseKind, f: Vec<Vec<i64>>, fp: Option<Vec<Vec<i64>>>) -> Scenario {
        Scenario {
            name: name.to_string(),
            geometry: Geometry::new(r, base, f, fp).expect("builtin geometry"),
            trunc: TruncBox::default(),
            sign_twist: false,
            lift: LiftChoice::Iminimal,
            weight_bound: 2,
        }
    }

    /// Σ₋₁ = P(𝒪⊕𝒪(1)) over P¹, as a single projective bundle.
    pub fn hirzebruch() -> Scenario {
        Self::make("hirzebruch", 1, BaseKind::P1, vec![vec![0], vec![1]], None)
    }

    /// P¹ flop with F = 𝒪⊕𝒪, F′ = 𝒪⊕𝒪(1).
    pub fn p1flop_00_01() -> Scenario {
        Self::make("p1flop_00_01", 1, BaseKind::P1, vec![vec![0], vec![0]], Some(vec![vec![0], vec![1]]))
    }

    /// P¹ flop with F = 𝒪(1)⊕𝒪(−4), F′ = 𝒪⊕𝒪, where λ_{b^I} = −3.
    pub fn p1flop_1m4_00() -> Scenario {
        Self::make("p1flop_1m4_00", 1, BaseKind::P1, vec![vec![1], vec![-4]], Some(vec![vec![0], vec![0]]))
    }

    /// Simple P¹ flop over a point.
    pub fn simple_flop(r: usize) -> Scenario {
        let z = vec![vec![]; r + 1];
        Self::make(&format!("simple_r{r}"), r, BaseKind::Point, z.clone(), Some(z))
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        match name {
            "hirzebruch" => Some(Self::hirzebruch()),
            "p1flop_00_01" => Some(Self::p1flop_00_01()),
            "p1flop_1m4_00" => Some(Self::p1flop_1m4_00()),
            "simple_r1" => Some(Self::simple_flop(1)),
            "simple_r2" => Some(Self::simple_flop(2)),
            _ => None,
        }
    }
}
