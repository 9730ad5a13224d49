use super::*;
use crate::cohring::invert_matrix;
use crate::geometry::BaseKind;
use crate::scenario::Scenario;
use proptest::prelude::*;

fn rf(num: Poly<Rational>, den: Poly<Rational>) -> RatFuncQ1 {
    RatFunc::new(num, den)
}

fn x_minus(e: i64) -> Poly<Rational> {
    lin(-e)
}

#[test]
fn harmonic_examples() {
    let h = HarmonicCache::new(10, 3);
    assert_eq!(h.get(0, 1), Some(&Rational::zero()));
    assert_eq!(h.get(3, 1), Some(&q(11, 6)));
    assert_eq!(h.get(2, 2), Some(&q(5, 4)));
    assert_eq!(h.get(-1, 1), None);
    assert_eq!(h.get(11, 1), None);
    for k in 1..=h.max_k() {
        for d in 1..=h.max_d() {
            let step = h.get(d, k).unwrap().minus(h.get(d - 1, k).unwrap());
            assert_eq!(step, qi(d).pow(k as i32).recip());
        }
    }
}

use crate::exactalg::q;

#[test]
fn fundamental_w_examples() {
    // r = 1, μ = μ′ = 0, d₂ = 0: ((x−1)!/x!)² = 1/x²
    let g = Scenario::simple_flop(1).geometry;
    let w = fundamental_w(&g, &[], 0, SignTwist::Off);
    assert_eq!(w.rat, rf(Poly::one(), x_minus(0).times(&x_minus(0))));
    assert_eq!(w.poles(), vec![(0, 2)]);
    for d in 3..=5 {
        assert_eq!(w.value(d), w.factorial_value(d));
    }
    // μ = (0,0), μ′ = (0,1): −1/(x²(x−1))
    let g = Scenario::p1flop_00_01().geometry;
    let w = fundamental_w(&g, &[1], 0, SignTwist::Off);
    let den = x_minus(0).times(&x_minus(0)).times(&x_minus(1));
    assert_eq!(w.rat, rf(Poly::constant(qi(-1)), den));
    assert_eq!(w.value(3), Some(q(-1, 18)));
    assert_eq!(w.factorial_value(3), Some(q(-1, 18)));
    // μ < −μ′ componentwise: a polynomial
    let g = Geometry::new(1, BaseKind::P1, vec![vec![-2], vec![-2]], Some(vec![vec![0], vec![0]])).unwrap();
    let w = fundamental_w(&g, &[1], 0, SignTwist::Off);
    assert!(w.rat.is_poly());
    assert_eq!(RatFunc::from_poly(w.polynomial_part()), w.rat);
    assert!(w.poles().is_empty());
}

fn flop_cases() -> Vec<(Geometry, Vec<i64>, i64)> {
    let mut v = vec![(Scenario::simple_flop(1).geometry, vec![], 0), (Scenario::simple_flop(2).geometry, vec![], 0)];
    for sc in [Scenario::p1flop_00_01(), Scenario::p1flop_1m4_00()] {
        for s in 0..3 {
            for d2 in 0..2 {
                v.push((sc.geometry.clone(), vec![s], d2));
            }
        }
    }
    v
}

#[test]
fn stable_values_match_factorials_and_poles_are_unstable() {
    for (g, bs, d2) in flop_cases() {
        for twist in [SignTwist::Off, SignTwist::On] {
            let w = fundamental_w(&g, &bs, d2, twist);
            for (e, _) in w.poles() {
                assert!(!w.is_stable(e));
            }
            for d in (w.unstable.1 + 1)..(w.unstable.1 + 8) {
                assert_eq!(w.value(d), w.factorial_value(d), "{bs:?} {d2} {d}");
                // Reg at a stable point is the value
                let (reg, pri) = reg_pri(&w, d);
                assert_eq!(Some(reg), w.value(d));
                assert!(pri.is_zero());
            }
        }
    }
}

#[test]
fn lemma_identity_for_every_w() {
    for (g, bs, d2) in flop_cases() {
        let w = fundamental_w(&g, &bs, d2, SignTwist::On);
        let poles: Vec<i64> = w.poles().iter().map(|p| p.0).collect();
        for e in (w.unstable.0 - 4)..=(w.unstable.1 + 4) {
            assert!(lemma_defect(&w.rat, &poles, e).is_zero(), "{bs:?} {d2} {e}");
        }
    }
}

#[test]
fn simple_pole_residue_product_formula() {
    // 1/∏_{j=−μ}^{μ′}(x − j), residue at d = ∏_{j≠d}(−1)/(j−d)
    for (lo, hi) in [(-1, 2), (0, 3), (-2, 0)] {
        let den = (lo..=hi).fold(Poly::one(), |p, j| p.times(&x_minus(j)));
        let f = rf(Poly::one(), den);
        for d in lo..=hi {
            let want = (lo..=hi).filter(|&j| j != d).fold(Rational::one(), |a, j| a.times(&qi(-1).over(&qi(j - d))));
            let (_, pri) = reg_pri_of(&f, d);
            assert_eq!(pri, rf(Poly::constant(want), x_minus(d)));
        }
    }
}

/// Partial fractions by undetermined coefficients:
/// N = Q·D + Σ_{j,k} c_{j,k} D/(x−e_j)^k.
fn brute_partial_fractions(num: &Poly<Rational>, poles: &[(i64, u32)]) -> (Poly<Rational>, BTreeMap<i64, Vec<Rational>>) {
    let den = poles.iter().fold(Poly::one(), |p, &(e, m)| p.times(&x_minus(e).pow(m)));
    let dd = den.deg().max(0) as usize;
    let qlen = (num.deg() - den.deg() + 1).max(0) as usize;
    let mut cols: Vec<Poly<Rational>> = (0..qlen).map(|k| den.shift(k)).collect();
    for &(e, m) in poles {
        for k in 1..=m {
            cols.push(den.divrem(&x_minus(e).pow(k)).0);
        }
    }
    let size = qlen + dd;
    assert_eq!(cols.len(), size);
    let mat: Vec<Vec<Rational>> = (0..size).map(|row| cols.iter().map(|c| c.coeff(row)).collect()).collect();
    let inv = invert_matrix(&mat).expect("partial fraction basis is independent");
    let rhs: Vec<Rational> = (0..size).map(|k| num.coeff(k)).collect();
    let sol: Vec<Rational> =
        inv.iter().map(|row| row.iter().zip(&rhs).fold(Rational::zero(), |a, (x, y)| a.plus(&x.times(y)))).collect();
    let quot = Poly::from_coeffs(sol[..qlen].to_vec());
    let mut pri = BTreeMap::new();
    let mut at = qlen;
    for &(e, m) in poles {
        pri.insert(e, sol[at..at + m as usize].to_vec());
        at += m as usize;
    }
    (quot, pri)
}

fn random_rf() -> impl Strategy<Value = (Poly<Rational>, Vec<(i64, u32)>)> {
    (
        proptest::collection::vec(-5i64..6, 1..6),
        proptest::collection::btree_map(-4i64..5, 1u32..3, 1..4),
    )
        .prop_map(|(n, p)| (Poly::from_coeffs(n.into_iter().map(qi).collect()), p.into_iter().collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lemma_identity_on_random_rational_functions((num, poles) in random_rf()) {
        let den = poles.iter().fold(Poly::one(), |p, &(e, m)| p.times(&x_minus(e).pow(m)));
        let f = rf(num.clone(), den);
        let (quot, oracle) = brute_partial_fractions(&num, &poles);
        prop_assert_eq!(f.polynomial_part(), quot.clone());
        let pri_at = |e: i64, x: i64| -> Rational {
            oracle[&e].iter().enumerate().fold(Rational::zero(), |a, (k, c)| a.plus(&c.over(&qi(x - e).pow(k as i32 + 1))))
        };
        // cancellation may lower pole orders; the true pole list is a subset
        let true_poles: Vec<i64> = poles.iter().map(|p| p.0).filter(|&e| f.eval(&qi(e)).is_none()).collect();
        for e in -6i64..7 {
            prop_assert!(lemma_defect(&f, &true_poles, e).is_zero());
            let (reg, pri) = reg_pri_of(&f, e);
            let mut want = quot.eval(&qi(e));
            for &(ej, _) in &poles {
                if ej != e {
                    want = want.plus(&pri_at(ej, e));
                }
            }
            prop_assert_eq!(reg.clone(), want);
            if let Some(c) = oracle.get(&e) {
                let mut p = RatFuncQ1::zero();
                for (k, ck) in c.iter().enumerate() {
                    p = p.plus(&RatFunc::from_poly(x_minus(e)).pow(-(k as i64) - 1).scale(ck));
                }
                prop_assert_eq!(pri, p);
            } else {
                prop_assert!(pri.is_zero());
                prop_assert_eq!(Some(reg), f.eval(&qi(e)));
            }
        }
    }

    #[test]
    fn harmonic_telescoping(d in 1i64..40, k in 1u32..5) {
        let h = HarmonicCache::new(40, 4);
        let step = h.get(d, k).unwrap().minus(h.get(d - 1, k).unwrap());
        prop_assert_eq!(step, qi(d).pow(k as i32).recip());
    }

    #[test]
    fn euler_identity_for_cubics(c in proptest::collection::vec(-4i64..5, 1..5), r in 1usize..4) {
        let p = Poly::from_coeffs(c.into_iter().map(qi).collect());
        prop_assert!(euler_identity(&p, r));
    }

    #[test]
    fn tail_sums_match_truncated_series(c in proptest::collection::vec(-4i64..5, 1..5), d0 in 1i64..4, r in 1usize..3) {
        let p = Poly::from_coeffs(c.into_iter().map(qi).collect());
        let f = tail_sum(&p, d0, r);
        let (v, coeffs) = f.laurent_at_zero(12);
        for (i, x) in coeffs.iter().enumerate() {
            let d = v + i as i64;
            let want = if d >= d0 { p.eval(&qi(d)).times(&eps_pow(r, d - 1)) } else { Rational::zero() };
            prop_assert_eq!(x.clone(), want);
        }
    }
}

#[test]
fn tail_sum_below_one_and_shifted_poles() {
    // Σ_{d ≥ e+1} q^d/(d−e)^k has no closed rational form, but P(d)-weighted
    // tails do, also starting at d0 ≤ 0
    let p = Poly::from_coeffs(vec![qi(-7), qi(1)]);
    let f = tail_sum(&p, -2, 1);
    let g = f.minus(&tail_sum(&p, 1, 1));
    let mut want = RatFuncQ1::zero();
    for d in -2..=0 {
        want = want.plus(&RatFuncQ1::x_pow(d).scale(&p.eval(&qi(d))));
    }
    assert_eq!(g, want);
}

#[test]
fn compatibility_on_ten_points_per_scenario() {
    for (g, bs, d2) in flop_cases() {
        if g.r % 2 == 0 {
            continue;
        }
        let w = fundamental_w(&g, &bs, d2, SignTwist::Off);
        let range: Vec<i64> = ((w.unstable.0 - 3)..=(w.unstable.1 + 6)).collect();
        assert!(range.len() >= 10);
        assert!(range.iter().any(|&d| w.is_stable(d)) && range.iter().any(|&d| !w.is_stable(d)));
        for d in range {
            let c = series_compatibility(&g, &bs, d2, d, -3, SignTwist::Off).unwrap();
            assert!(c.mismatches().is_empty(), "{bs:?} {d2} {d}: {c:?}");
        }
    }
}

#[test]
fn compatibility_trivial_and_stable_examples() {
    let g = Scenario::simple_flop(1).geometry;
    // d = 0, all lengths 0: z^{r+1}·1 on both sides
    let c = series_compatibility(&g, &[], 0, 0, -2, SignTwist::Off).unwrap();
    assert_eq!(c.laurent[&2], Rational::one());
    assert_eq!(c.specialized[&2], Rational::one());
    assert!(c.mismatches().is_empty());
    // stable d: W₀ is the value of W
    let w = fundamental_w(&g, &[], 0, SignTwist::Off);
    let c = series_compatibility(&g, &[], 0, 4, -2, SignTwist::Off).unwrap();
    assert_eq!(Some(c.specialized[&0].clone()), w.value(4));
    assert!((1..=2).all(|k| c.specialized[&k].is_zero()));
    // unstable d = 1 at β_S = 1 with b-lengths (−1, 0): leading orders agree
    let g = Scenario::p1flop_00_01().geometry;
    let c = series_compatibility(&g, &[1], 0, 1, -2, SignTwist::Off).unwrap();
    let lead = |m: &BTreeMap<i32, Rational>| m.iter().rev().find(|(_, x)| !x.is_zero()).map(|(k, _)| *k);
    assert_eq!(lead(&c.laurent), lead(&c.specialized));
    assert_eq!(lead(&c.laurent), Some(1));
}

#[test]
fn even_rank_sign_convention() {
    // r = 2: the literal W matches up to Θ|_{b=−1} = −1; the absorbed twist
    // is off by (−1)^d
    let g = Scenario::simple_flop(2).geometry;
    for d in -3..8 {
        let plain = series_compatibility(&g, &[], 0, d, -2, SignTwist::Off).unwrap();
        assert!(plain.mismatches().is_empty(), "{d}");
        let tw = series_compatibility(&g, &[], 0, d, -2, SignTwist::On).unwrap();
        let nonzero = tw.laurent.values().any(|x| !x.is_zero());
        assert_eq!(tw.mismatches().is_empty(), d % 2 == 0 || !nonzero, "{d}");
    }
}

#[test]
fn formal_series_matches_harmonic_formula_and_ifunc() {
    let h = HarmonicCache::new(30, 8);
    for (g, bs, d2) in flop_cases() {
        let alg = TotalAlgebra::new(&g);
        let vars: Vec<CohClass> = (0..=g.r).map(|i| alg.a_class(i)).chain((0..=g.r).map(|i| alg.b_class(i))).collect();
        let maxdeg = alg.dim() + 1;
        let lam = lambda(&g, &CurveClass::new(bs.clone(), 0, d2));
        for d in -4..8 {
            let f = w_free(&g, &bs, d2, d, maxdeg);
            assert_eq!(f, w_harmonic(&g, &bs, d2, d, maxdeg, &h), "{bs:?} {d2} {d}");
            let b = CurveClass::new(bs.clone(), d, d2);
            let want = relative_factor_strip_xi(&alg, &g, &b).scale(&factorial(d2)).shift_z((lam + g.r as i64 + 1) as i32);
            let mut got = ZSeries::zero();
            for n in 0..=maxdeg {
                got.add_term(g.r as i32 + 1 - n as i32, &f.part(n).to_class(&alg, &vars));
            }
            assert_eq!(got, want, "{bs:?} {d2} {d}");
        }
    }
}

#[test]
fn first_step_on_a_negative_lambda_scenario() {
    let g = Scenario::p1flop_1m4_00().geometry;
    let rep = partial_bf1(&g, &[1], 0, 8, SignTwist::Off).unwrap();
    assert_eq!(rep.lambda, -3);
    assert_eq!(rep.unstable, (-1, 0));
    // W = (x−1)(x−2)(x−3)/(x(x+1)), polynomial part x − 7
    assert_eq!(rep.polynomial_part, Poly::from_coeffs(vec![qi(-7), qi(1)]));
    assert!(rep.stable_values.len() >= rep.degree_bound as usize + 2);
    assert!(rep.stable_polynomiality(), "{rep:?}");
    assert!(rep.degree_within_bound());
    assert!(rep.top_defect_opposite_sign_failures.len() == 2);
    assert!(rep.pass(), "{rep:?}");
}

#[test]
fn first_step_flop_clauses_on_all_flop_cases() {
    for (g, bs, d2) in flop_cases() {
        if g.r % 2 == 0 {
            continue;
        }
        let rep = partial_bf1(&g, &bs, d2, 5, SignTwist::Off).unwrap();
        assert!(rep.positive_z.is_empty(), "{bs:?} {d2}");
        assert!(rep.top_defect_failures.is_empty(), "{bs:?} {d2}: {:?}", rep.top_defect_failures);
        // the 𝒯-difference is (−1)^r P(d)Θ′
        let p = rep.polynomial_part.scale(&sign(g.r as i64));
        assert!(rep.flop_values.iter().all(|(d, v)| v.as_ref() == Some(&p.eval(&qi(*d)))), "{bs:?} {d2}");
        assert!(rep.flop_polynomial.is_some(), "{bs:?} {d2}: {:?}", rep.flop_values);
        assert!(rep.stable_polynomiality(), "{bs:?} {d2}: {rep:?}");
        assert!(rep.euler_identity);
        if rep.lambda > -(g.r as i64 + 1) {
            assert!(rep.flop_positive_z.is_empty());
        }
    }
}

#[test]
fn pole_count_does_not_bound_the_polynomial_degree() {
    // W = (x−1)⋯(x−7)/(x(x+1)(x+2)): three simple poles, deg P = 4
    let g = Scenario::p1flop_1m4_00().geometry;
    let rep = partial_bf1(&g, &[2], 0, 2, SignTwist::Off).unwrap();
    assert_eq!(rep.degree_bound, 3);
    assert_eq!(rep.polynomial_part.deg(), 4);
    assert!(!rep.degree_within_bound());
    assert!(rep.stable_polynomiality());
    assert!(rep.stable_values.len() >= 6);
}

#[test]
fn second_step_first_series_vanishes() {
    let g = Scenario::p1flop_1m4_00().geometry;
    let rep = partial_bf2(&g, &[1], 0, 6, W0Quantization::Normalized).unwrap();
    assert_eq!(rep.lambda, -3);
    assert!(rep.first_series_nonzero.is_empty(), "{:?}", rep.first_series_nonzero);
    // the unnormalised Ŵ₀ leaks Reg W(e) into every larger class
    let naive = partial_bf2(&g, &[1], 0, 6, W0Quantization::Naive).unwrap();
    assert!(!naive.first_series_nonzero.is_empty());
    assert_eq!(
        partial_bf2(&Scenario::p1flop_00_01().geometry, &[1], 0, 2, W0Quantization::Normalized),
        Err(RegularizeError::LambdaTooLarge(1))
    );
}

#[test]
fn second_series_trouble_term() {
    // P₁I carries the harmonic term at z⁻¹; the stable Θ̂ series of P₂ cancels it.
    let g = Scenario::p1flop_1m4_00().geometry;
    let rep = partial_bf2(&g, &[1], 0, 32, W0Quantization::Normalized).unwrap();
    assert!(!rep.trouble_class.is_zero());
    let h = HarmonicCache::new(64, 1);
    let column = |ser: &BTreeMap<i64, CohClass>, j: usize| -> Vec<(i64, Rational)> {
        ser.iter().map(|(d, c)| (*d, c.0[j].clone())).collect()
    };
    let mut raw_rational = true;
    for j in 0..rep.trouble_class.len() {
        let raw = column(&rep.second_series_p1, j);
        let rest: Vec<(i64, Rational)> = raw
            .iter()
            .map(|(d, v)| {
                let t = rep.trouble_class.0[j].times(&rep.polynomial.eval(&qi(*d))).times(h.get(d - 1, 1).unwrap());
                (*d, v.minus(&t))
            })
            .collect();
        assert!(fits_rational(&rest, 10, 10), "coordinate {j}");
        raw_rational &= fits_rational(&raw, 10, 10);
        assert!(fits_rational(&column(&rep.second_series, j), 10, 10), "P₂ coordinate {j}");
    }
    assert!(!raw_rational);
}

#[test]
fn rational_fit_detects_harmonic_numbers() {
    let h = HarmonicCache::new(40, 1);
    let rat: Vec<(i64, Rational)> = (1..30).map(|d| (d, qi(d * d + 1).over(&qi(d + 3)))).collect();
    assert!(fits_rational(&rat, 3, 3));
    let harm: Vec<(i64, Rational)> = (1..30).map(|d| (d, h.get(d, 1).unwrap().clone())).collect();
    assert!(!fits_rational(&harm, 8, 8));
}

#[test]
fn interpolation_recovers_a_cubic() {
    let p = Poly::from_coeffs(vec![qi(1), qi(-2), qi(0), qi(3)]);
    let pts: Vec<(i64, Rational)> = (0..4).map(|d| (d, p.eval(&qi(d)))).collect();
    assert_eq!(interpolate(&pts), p);
}
