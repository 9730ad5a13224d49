//! Exact scalar arithmetic: rationals, univariate rational functions, the
//! bivariate field ℚ(q₁)(u) and the connection-coefficient ring over it.

mod coeff;
mod expr;
mod field;
mod poly;
mod ratfunc;

pub use coeff::{
    birat_q1_euler, birat_scale_u, birat_u_euler, birat_u_series, q1_birat, q1rat_birat,
    rat_birat, u_birat, BiRat, CoeffElem, SeriesTerm, VarWeights,
};
pub use expr::{base_symbols, parse_coeff, ExprError};
pub use field::{parse_rational, q, qi, Field, Rational};
pub use poly::Poly;
pub use ratfunc::{
    f_basic, laurent_at, partial_fractions, principal_part, regular_value, PartialFractionError,
    RatFunc, RatFuncQ1,
};

/// q ↦ 1/q on ℚ(q).
pub fn substitute_inverse(f: &RatFuncQ1) -> RatFuncQ1 {
    f.substitute_inverse()
}

/// Polynomial part of a rational function (quotient of long division).
pub fn polynomial_part(f: &RatFuncQ1) -> Poly<Rational> {
    f.polynomial_part()
}
