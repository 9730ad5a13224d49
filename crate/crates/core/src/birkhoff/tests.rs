use super::*;
use crate::golden::builtin;
use crate::ifunc::{assemble_i, LiftedBox};
use crate::lerayhirsch::{assemble_connection, flop_gauge};
use crate::cohring::TotalAlgebra;
use crate::scenario::{LiftChoice, Scenario};

fn gauge(sc: &Scenario, lift: LiftChoice, bound: Weight) -> Gauge {
    let conn = assemble_connection(&sc.geometry, lift).unwrap();
    gauge_from_connection(&sc.geometry, &conn, bound).unwrap()
}

#[test]
fn hirzebruch_gauge_matches_golden() {
    let sc = Scenario::hirzebruch();
    let g = gauge(&sc, LiftChoice::Iminimal, (3, 0));
    let gold = builtin("hirzebruch").unwrap();
    for (key, m) in [
        ("B", g.b.to_cmatrix()),
        ("B_inv", g.b_inv.to_cmatrix()),
        ("Ct_h", g.ct_for(Dir::H).to_cmatrix()),
        ("Ct_p", g.ct_for(Dir::Base(0)).to_cmatrix()),
    ] {
        let bad = gold.compare(key, &m).unwrap();
        assert!(bad.is_empty(), "{key}: {bad:?}");
    }
    assert!(g.tau.is_empty());
    assert!(reduced_connection_residuals(&sc.geometry, &g).is_empty());
}

#[test]
fn p1flop_gauge_is_consistent() {
    let sc = Scenario::p1flop_00_01();
    let g = gauge(&sc, LiftChoice::Twisted, (2, 2));
    assert!(reduced_connection_residuals(&sc.geometry, &g).is_empty());
    for ct in &g.ct {
        assert!(ct.is_z_free());
    }
}

fn cases() -> Vec<(Scenario, LiftChoice, LiftedBox)> {
    vec![
        (Scenario::hirzebruch(), LiftChoice::Iminimal, LiftedBox { bs: 3, d2: 0, dmax: 4 }),
        (Scenario::p1flop_00_01(), LiftChoice::Twisted, LiftedBox { bs: 2, d2: 2, dmax: 3 }),
        (Scenario::simple_flop(1), LiftChoice::Iminimal, LiftedBox { bs: 0, d2: 0, dmax: 5 }),
    ]
}

#[test]
fn routes_agree_on_the_box() {
    for (sc, lift, bx) in cases() {
        let geo = &sc.geometry;
        let alg = TotalAlgebra::new(geo);
        let i = assemble_i(&alg, geo, bx);
        let g = gauge(&sc, lift, (bx.bs, bx.d2));
        let f = birkhoff_columns(&alg, geo, &i);
        let bad = compare_routes(&g, &f, &bx);
        assert!(bad.is_empty(), "{}: {:?}", sc.name, &bad[..bad.len().min(4)]);
        // L = Id + O(1/z)
        assert!(f.l.values().all(|m| m.keys().all(|&k| k < 0)));
    }
}

#[test]
fn both_bf_orders_agree_with_the_gauge() {
    for (sc, lift, bx) in cases() {
        let geo = &sc.geometry;
        let alg = TotalAlgebra::new(geo);
        let i = assemble_i(&alg, geo, bx);
        let a = bf_gmt(&alg, geo, &i, BfOrder::ClassByClass);
        let b = bf_gmt(&alg, geo, &i, BfOrder::WeightSweep);
        assert_eq!(a.p, b.p, "{}", sc.name);
        assert_eq!(a.j, b.j, "{}", sc.name);
        assert!(nonnegative_z_classes(&a).is_empty());
        // P ≡ 1 and τ ≡ 0 away from nonzero weight
        for (c, v) in &a.p {
            if (c.0, c.2) == (0, 0) {
                assert_eq!(*c, (0, 0, 0), "{}: P at {c:?} = {v:?}", sc.name);
            }
        }
        assert!(a.tau.keys().all(|c| (c.0, c.2) != (0, 0)));
        let g = gauge(&sc, lift, (bx.bs, bx.d2));
        assert!(compare_p_with_gauge(&a, &g, &bx).is_empty(), "{}", sc.name);
        assert!(compare_tau(&a, &g, &bx).is_empty(), "{}", sc.name);
    }
}

#[test]
fn hirzebruch_has_trivial_mirror_transform() {
    let (sc, _, bx) = cases().remove(0);
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let i = assemble_i(&alg, geo, bx);
    let bf = bf_gmt(&alg, geo, &i, BfOrder::ClassByClass);
    assert_eq!(bf.p.len(), 1);
    assert!(bf.tau.values().all(|t| t.iter().all(|x| x.is_zero())));
}

#[test]
fn hirzebruch_invariants() {
    let (sc, lift, bx) = cases().remove(0);
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let g = gauge(&sc, lift, (bx.bs, bx.d2));
    let inv = extract_invariants(&alg, geo, &g, bx.dmax);
    assert!(inv.iter().all(|i| !i.flagged));
    let gold = builtin("hirzebruch").unwrap();
    for gi in &gold.invariants {
        let d = if gi.matrix == "Ct_h" { Dir::H } else { Dir::Base(0) };
        let want = gold.parse(&gi.value).unwrap();
        // the golden value is a single monomial u^s q1^e
        let t = want.expand(3, 4);
        assert_eq!(t.len(), 1);
        let class = class_of_lifted(geo, t[0].u, t[0].q1, t[0].q2);
        let hit = inv
            .iter()
            .find(|i| i.dir == d && i.kappa == gi.row - 1 && i.nu == gi.col - 1 && i.class == class)
            .unwrap_or_else(|| panic!("{}", gi.label));
        assert_eq!(hit.value, t[0].c);
    }
    let i = assemble_i(&alg, geo, bx);
    let bf = bf_gmt(&alg, geo, &i, BfOrder::ClassByClass);
    assert!(divisor_axiom_failures(&alg, geo, &inv, &bf).is_empty());
}

#[test]
fn flop_invariance_of_gauge_and_mirror_map() {
    for sc in [Scenario::p1flop_00_01(), Scenario::simple_flop(1)] {
        let geo = &sc.geometry;
        let gp = Scenario { geometry: geo.mirror(), ..sc.clone() };
        let bound = if geo.is_double() { (2, 2) } else { (0, 0) };
        let g = gauge(&sc, LiftChoice::Iminimal, bound);
        let gpr = gauge(&gp, LiftChoice::Iminimal, bound);
        let p = flop_gauge(geo, LiftChoice::Iminimal).unwrap();
        let r = check_flop_invariance(geo, &g, &gpr, &p).unwrap();
        assert!(r.pass(), "{}: {r:?}", sc.name);
        // negative control: a perturbed gauge is caught
        let mut bad = g.clone();
        let w = *bad.b.parts.keys().find(|k| k.0 != (0, 0)).unwrap_or(&((0, 0), 0));
        bad.b.parts.entry(w).or_insert_with(|| qzero(g.b.n))[0][0] = RatFuncQ1::from_i64(7);
        assert!(!check_flop_invariance(geo, &bad, &gpr, &p).unwrap().pass());
    }
}

#[test]
fn nontrivial_mirror_transform_from_both_orders() {
    let sc = Scenario::p1flop_1m4_00();
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let i = assemble_i(&alg, geo, LiftedBox { bs: 2, d2: 1, dmax: 4 });
    let a = bf_gmt(&alg, geo, &i, BfOrder::ClassByClass);
    let b = bf_gmt(&alg, geo, &i, BfOrder::WeightSweep);
    assert_eq!(a, b);
    assert!(a.p.len() > 1);
    assert!(a.tau.values().any(|t| t.iter().any(|x| !x.is_zero())));
    assert!(nonnegative_z_classes(&a).is_empty());
    // P ≡ 1 and τ ≡ t̂ at weight (0, 0)
    assert!(a.p.keys().all(|c| (c.0, c.2) != (0, 0) || *c == (0, 0, 0)));
    assert!(a.tau.keys().all(|c| (c.0, c.2) != (0, 0)));
    // J = 1 + τ/z + O(1/z²)
    for (c, j) in &a.j {
        if *c != (0, 0, 0) {
            assert!(j.keys().all(|&k| k < 0));
        }
    }
}

mod props {
    use super::*;
    use crate::exactalg::{Poly, RatFunc};
    use proptest::prelude::*;

    fn small_rf() -> impl Strategy<Value = RatFuncQ1> {
        (proptest::collection::vec(-2i64..3, 1..3), 0usize..2).prop_map(|(n, d)| {
            let num = Poly::from_coeffs(n.iter().map(|&a| Rational::from_i64(a)).collect());
            let den = Poly::from_coeffs(vec![Rational::from_i64(1), Rational::from_i64(-(d as i64))]);
            RatFunc::new(num, den)
        })
    }

    /// Identity plus a few random parts of positive weight on a 3x3 grid.
    fn unipotent() -> impl Strategy<Value = Graded> {
        proptest::collection::vec(((0i64..2, 0i64..2), 0i32..2, 0usize..3, 0usize..3, small_rf()), 0..5).prop_map(|v| {
            let mut g = Graded::identity(3, (2, 2));
            for (w, j, r, c, f) in v {
                if w == (0, 0) {
                    continue;
                }
                let p = g.parts.entry((w, j)).or_insert_with(|| qzero(3));
                p[r][c] = f;
            }
            g.prune();
            g
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn inverse_is_two_sided(b in unipotent()) {
            let inv = graded_inverse(&b);
            prop_assert_eq!(b.mul(&inv), Graded::identity(3, (2, 2)));
            prop_assert_eq!(inv.mul(&b), Graded::identity(3, (2, 2)));
        }

        #[test]
        fn flop_is_an_involution_and_multiplicative(a in unipotent(), b in unipotent(), k in -2i64..3) {
            prop_assert_eq!(a.flop(k).flop(k), a.clone());
            prop_assert_eq!(a.mul(&b).flop(k), a.flop(k).mul(&b.flop(k)));
        }

        #[test]
        fn cmatrix_roundtrip(a in unipotent()) {
            prop_assert_eq!(Graded::from_cmatrix(&a.to_cmatrix(), (2, 2)).unwrap(), a);
        }
    }
}
