//! One function per subcommand, each returning an [`Artifact`].

use crate::render::*;
use crate::{Artifact, Cli, Command, Mask, UsageError};
use qlh::birkhoff::*;
use qlh::cohring::{Dir, TotalAlgebra};
use qlh::exactalg::qi;
use qlh::geometry::Geometry;
use qlh::golden::{builtin, dir_of};
use qlh::ifunc::{assemble_i, homogeneity_defect, LiftedBox};
use qlh::lerayhirsch::{assemble_connection, check_naturality, flop_gauge, Connection};
use qlh::pfsystem::{apply, build_pf, flop_pf_identities, OpCtx};
use qlh::regularize::*;
use qlh::scenario::Scenario;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write;

pub fn dispatch(cli: &Cli, sc: &Scenario) -> Result<Artifact, UsageError> {
    let nt = Notation { r: sc.geometry.r, abbreviate: !cli.expand_abbrev };
    match &cli.command {
        Command::Ifunc => Ok(ifunc(sc)),
        Command::PfCheck => Ok(pf_check(sc)),
        Command::Connection { direction } => connection(sc, direction.as_deref(), nt),
        Command::Gauge => gauge(sc, nt),
        Command::MirrorMap => Ok(mirror_map(sc)),
        Command::Invariants => invariants(sc),
        Command::FlopCheck => flop_check(sc),
        Command::Regularize { beta_s, d2, step, extra } => regularize(sc, beta_s, *d2, *step, *extra),
        Command::Golden { name } => golden(sc, name, nt),
    }
}

fn lifted_box(sc: &Scenario) -> LiftedBox {
    LiftedBox { bs: sc.trunc.bs, d2: sc.trunc.d2, dmax: sc.trunc.dmax }
}

fn weight_bound(sc: &Scenario) -> Weight {
    let w = sc.weight_bound;
    if sc.geometry.is_double() {
        (w, w)
    } else {
        (w, 0)
    }
}

fn dir_name(d: Dir) -> &'static str {
    match d {
        Dir::H => "h",
        Dir::Xi => "xi",
        Dir::Base(_) => "p",
    }
}

fn connection_of(sc: &Scenario) -> Result<Connection, UsageError> {
    assemble_connection(&sc.geometry, sc.lift).map_err(|e| UsageError(format!("connection unavailable for {}: {e}", sc.name)))
}

fn gauge_of(sc: &Scenario, conn: &Connection) -> Result<Gauge, UsageError> {
    gauge_from_connection(&sc.geometry, conn, weight_bound(sc)).map_err(|e| UsageError(format!("gauge unavailable for {}: {e}", sc.name)))
}

fn zseries_json(alg: &TotalAlgebra, s: &qlh::ifunc::ZSeries) -> Value {
    let m: BTreeMap<String, Value> = s.terms.iter().map(|(k, c)| (k.to_string(), class_json(alg, c))).collect();
    json!(m)
}

fn zvec_json(alg: &TotalAlgebra, v: &ZVec) -> Value {
    let m: BTreeMap<String, Value> = v.iter().map(|(k, c)| (k.to_string(), vec_json(alg, c))).collect();
    json!(m)
}

fn ifunc(sc: &Scenario) -> Artifact {
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let bx = lifted_box(sc);
    let i = assemble_i(&alg, geo, bx);
    let mut failures = Vec::new();
    let mut text = format!("I on box {:?}, {} nonzero classes\n", (bx.bs, bx.d2, bx.dmax), i.terms.len());
    let mut terms = BTreeMap::new();
    for (b, v) in &i.terms {
        let bad = homogeneity_defect(&alg, geo, b, v);
        if !bad.is_empty() {
            failures.push(json!({"class": class_key(b), "inhomogeneous_z_powers": bad}));
        }
        terms.insert(class_key(b), zseries_json(&alg, v));
        let _ = writeln!(text, "β = {}", class_key(b));
        for (k, c) in &v.terms {
            let _ = writeln!(text, "  z^{k}: {}", class_text(&alg, c));
        }
    }
    Artifact {
        command: "ifunc",
        pass: failures.is_empty(),
        mask: Mask::Classes(bx.classes(geo).iter().map(class_key).collect()),
        result: json!({"basis": labels(&alg), "terms": terms}),
        failures,
        text,
    }
}

fn pf_check(sc: &Scenario) -> Artifact {
    let geo = &sc.geometry;
    let (alg, ctx) = (TotalAlgebra::new(geo), OpCtx::new(geo));
    let i = assemble_i(&alg, geo, lifted_box(sc));
    let (bl, bg) = build_pf(&ctx, &alg);
    let mut table = BTreeMap::new();
    let mut failures = Vec::new();
    let mut resolved: Option<Vec<String>> = None;
    let mut text = String::new();
    for (name, op) in [("box_l", Some(bl)), ("box_g", bg)] {
        let Some(op) = op else { continue };
        let r = apply(&ctx, &alg, geo, &op, &i);
        let mut rows = BTreeMap::new();
        for b in r.terms.keys() {
            let status = if r.boundary.contains(b) {
                "boundary"
            } else if r.terms[b].is_zero() {
                "zero"
            } else {
                "nonzero"
            };
            rows.insert(class_key(b), status);
        }
        for b in r.nonzero_resolved() {
            failures.push(json!({"operator": name, "class": class_key(&b)}));
        }
        let here: Vec<String> = r.terms.keys().filter(|b| !r.boundary.contains(*b)).map(class_key).collect();
        resolved = Some(match resolved {
            None => here,
            Some(prev) => prev.into_iter().filter(|k| here.contains(k)).collect(),
        });
        let zero = rows.values().filter(|s| **s == "zero").count();
        let _ = writeln!(text, "{name}: {zero} zero, {} boundary, {} nonzero", r.boundary.len(), r.nonzero_resolved().len());
        table.insert(name, rows);
    }
    Artifact {
        command: "pf-check",
        pass: failures.is_empty(),
        mask: Mask::Classes(resolved.unwrap_or_default()),
        result: json!({"residuals": table}),
        failures,
        text,
    }
}

fn connection(sc: &Scenario, direction: Option<&str>, nt: Notation) -> Result<Artifact, UsageError> {
    let alg = TotalAlgebra::new(&sc.geometry);
    let conn = connection_of(sc)?;
    let want = match direction {
        None => None,
        Some(d) => Some(dir_of(d).filter(|d| conn.dirs.contains(d)).ok_or_else(|| UsageError(format!("no direction {d:?}")))?),
    };
    let lab = labels(&alg);
    let mut mats = BTreeMap::new();
    let mut text = String::new();
    for (k, &d) in conn.dirs.iter().enumerate() {
        if want.is_some_and(|w| w != d) {
            continue;
        }
        let cells = matrix_strings(&conn.mats[k], nt);
        text.push_str(&grid(&format!("C_{}", dir_name(d)), &lab, &cells));
        text.push('\n');
        mats.insert(dir_name(d), cells);
    }
    let lift = conn.lift.as_ref().map(class_key);
    Ok(Artifact {
        command: "connection",
        pass: true,
        mask: Mask::Exact,
        result: json!({"basis": lab, "lift": lift, "abbreviated": nt.abbreviate, "matrices": mats}),
        failures: vec![],
        text,
    })
}

fn graded_cells(g: &Graded, nt: Notation) -> Vec<Vec<String>> {
    matrix_strings(&g.to_cmatrix(), nt)
}

fn gauge(sc: &Scenario, nt: Notation) -> Result<Artifact, UsageError> {
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let conn = connection_of(sc)?;
    let g = gauge_of(sc, &conn)?;
    let lab = labels(&alg);
    let mut text = String::new();
    let mut mats = BTreeMap::new();
    let mut entries = vec![("B".to_string(), &g.b), ("B_inv".to_string(), &g.b_inv)];
    for (k, &d) in g.dirs.iter().enumerate() {
        entries.push((format!("Ct_{}", dir_name(d)), &g.ct[k]));
    }
    for (name, m) in entries {
        let cells = graded_cells(m, nt);
        text.push_str(&grid(&name, &lab, &cells));
        text.push('\n');
        mats.insert(name, cells);
    }
    let tau: BTreeMap<String, Vec<String>> =
        g.tau.iter().map(|(w, v)| (format!("{},{}", w.0, w.1), v.iter().map(|x| nt.q1(x)).collect())).collect();
    let failures: Vec<Value> = reduced_connection_residuals(geo, &g)
        .into_iter()
        .map(|r| json!({"identity": r.what, "direction": dir_name(r.dir), "weight": [r.w.0, r.w.1], "z": r.k}))
        .collect();
    let _ = writeln!(text, "τ nonzero at {} weights", tau.len());
    Ok(Artifact {
        command: "gauge",
        pass: failures.is_empty() && g.ct.iter().all(|c| c.is_z_free()),
        mask: Mask::Weights(weights_upto(g.bound)),
        result: json!({"basis": lab, "matrices": mats, "tau": tau}),
        failures,
        text,
    })
}

fn mirror_map(sc: &Scenario) -> Artifact {
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let i = assemble_i(&alg, geo, lifted_box(sc));
    let a = bf_gmt(&alg, geo, &i, BfOrder::ClassByClass);
    let b = bf_gmt(&alg, geo, &i, BfOrder::WeightSweep);
    let mut failures = Vec::new();
    if a != b {
        failures.push(json!({"check": "enumeration orders disagree"}));
    }
    for c in nonnegative_z_classes(&a) {
        failures.push(json!({"check": "non-negative z-power in J", "class": lifted_key(&c)}));
    }
    let p: BTreeMap<String, Value> = a.p.iter().map(|(c, v)| (lifted_key(c), zvec_json(&alg, v))).collect();
    let tau: BTreeMap<String, Value> = a.tau.iter().map(|(c, v)| (lifted_key(c), vec_json(&alg, v))).collect();
    let mut text = format!("P(z) on {} classes, τ on {} classes\n", p.len(), tau.len());
    for (c, v) in &a.tau {
        let _ = writeln!(text, "τ[{}] = {}", lifted_key(c), class_text(&alg, &qlh::cohring::CohClass(v.clone())));
    }
    Artifact {
        command: "mirror-map",
        pass: failures.is_empty(),
        mask: Mask::Classes(a.resolved.iter().map(lifted_key).collect()),
        result: json!({"basis": labels(&alg), "classes": "u^s q1^e1 q2^e2 as s,e1,e2", "P": p, "tau": tau}),
        failures,
        text,
    }
}

fn invariants(sc: &Scenario) -> Result<Artifact, UsageError> {
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let conn = connection_of(sc)?;
    let g = gauge_of(sc, &conn)?;
    let inv = extract_invariants(&alg, geo, &g, sc.trunc.dmax);
    let i = assemble_i(&alg, geo, lifted_box(sc));
    let bf = bf_gmt(&alg, geo, &i, BfOrder::ClassByClass);
    let bad = divisor_axiom_failures(&alg, geo, &inv, &bf);
    let row = |x: &Invariant| {
        json!({"label": x.label, "class": class_key(&x.class), "value": x.value.to_string(), "flagged": x.flagged})
    };
    let mut text = String::new();
    for x in &inv {
        let _ = writeln!(text, "{} at {} = {}{}", x.label, class_key(&x.class), x.value, if x.flagged { "  (flagged)" } else { "" });
    }
    Ok(Artifact {
        command: "invariants",
        pass: bad.is_empty(),
        mask: Mask::Weights(weights_upto(g.bound)),
        result: json!({"invariants": inv.iter().map(row).collect::<Vec<_>>()}),
        failures: bad.iter().map(|x| json!({"check": "divisor axiom", "invariant": row(x)})).collect(),
        text,
    })
}

fn flop_check(sc: &Scenario) -> Result<Artifact, UsageError> {
    let geo = &sc.geometry;
    if !geo.is_double() {
        return Err(UsageError(format!("{} has no flop side", sc.name)));
    }
    let gp: Geometry = geo.mirror();
    let scp = Scenario { geometry: gp.clone(), ..sc.clone() };
    let mut failures = Vec::new();
    let mut text = String::new();
    let pf = flop_pf_identities(geo, false);
    if let Some(m) = &pf.first_mismatch {
        failures.push(json!({"check": "flop of Picard-Fuchs operators", "detail": m}));
    }
    let _ = writeln!(text, "𝒯□ identities: {}", if pf.pass() { "exact" } else { "FAIL" });
    let c = connection_of(sc)?;
    let cp = connection_of(&scp)?;
    let p = flop_gauge(geo, sc.lift).map_err(|e| UsageError(e.to_string()))?;
    let nat = check_naturality(geo, &c, &cp, &p);
    for f in &nat {
        failures.push(json!({"check": "naturality", "direction": dir_name(f.dir), "row": f.row, "col": f.col, "lhs": f.lhs, "rhs": f.rhs}));
    }
    let _ = writeln!(text, "naturality: {} mismatches", nat.len());
    let g = gauge_of(sc, &c)?;
    let gpr = gauge_of(&scp, &cp)?;
    let rep = check_flop_invariance(geo, &g, &gpr, &p).map_err(|e| UsageError(e.to_string()))?;
    if let Some((w, k, i, j)) = rep.b_mismatch {
        failures.push(json!({"check": "gauge", "weight": [w.0, w.1], "z": k, "row": i, "col": j}));
    }
    if let Some((w, i)) = rep.tau_mismatch {
        failures.push(json!({"check": "mirror map", "weight": [w.0, w.1], "component": i}));
    }
    let _ = writeln!(text, "gauge and mirror map: {} parts checked, {}", rep.parts_checked, if rep.pass() { "invariant" } else { "FAIL" });
    Ok(Artifact {
        command: "flop-check",
        pass: failures.is_empty(),
        mask: Mask::Weights(weights_upto(g.bound)),
        result: json!({
            "pf_identities": pf.pass(),
            "naturality_mismatches": nat.len(),
            "gauge_parts_checked": rep.parts_checked,
            "gauge_invariant": rep.pass(),
        }),
        failures,
        text,
    })
}

fn regularize(sc: &Scenario, beta_s: &[i64], d2: i64, step: u8, extra: i64) -> Result<Artifact, UsageError> {
    let geo = &sc.geometry;
    let ngens = geo.base.ngens();
    let bs: Vec<i64> = if beta_s.is_empty() { vec![0; ngens] } else { beta_s.to_vec() };
    if bs.len() != ngens {
        return Err(UsageError(format!("--beta-s needs {ngens} entries, got {}", bs.len())));
    }
    let twist = if sc.sign_twist { SignTwist::On } else { SignTwist::Off };
    if step == 2 {
        return regularize2(sc, &bs, d2, extra);
    }
    let rep = partial_bf1(geo, &bs, d2, extra, twist)?;
    let w = fundamental_w(geo, &bs, d2, twist);
    let poles: Vec<i64> = w.poles().iter().map(|p| p.0).collect();
    let lo = rep.unstable.0.min(0) - 2;
    let hi = rep.stable_values.keys().max().copied().unwrap_or(rep.unstable.1).max(rep.unstable.1 + 2);
    let mut rows = Vec::new();
    let mut text = format!(
        "W = {}\nλ = {}, unstable {:?}, P(d) = {}\n{:>4}  {:>12}  {:>24}  {:>10}  {:>6}\n",
        w.rat.render(&["d"]),
        rep.lambda,
        rep.unstable,
        rep.polynomial_part.render(&["d"]),
        "d",
        "Reg",
        "Pri",
        "P(d)",
        "defect"
    );
    for d in lo..=hi {
        let (reg, pri) = reg_pri(&w, d);
        let pd = rep.polynomial_part.eval(&qi(d));
        let defect = lemma_defect(&w.rat, &poles, d);
        let _ = writeln!(text, "{d:>4}  {:>12}  {:>24}  {:>10}  {:>6}", reg.to_string(), pri.render(&["d"]), pd.to_string(), defect.to_string());
        rows.push(json!({"d": d, "reg": reg.to_string(), "pri": pri.render(&["d"]), "polynomial": pd.to_string(), "defect": defect.to_string()}));
    }
    let mut failures = Vec::new();
    if !rep.stable_polynomiality() {
        failures.push(json!({"check": "stable-range polynomiality"}));
    }
    for d in &rep.positive_z {
        failures.push(json!({"check": "positive z-power left", "d": d}));
    }
    for d in &rep.top_defect_failures {
        failures.push(json!({"check": "top defect", "d": d}));
    }
    if !rep.euler_identity {
        failures.push(json!({"check": "Euler identity"}));
    }
    let opt = |p: &Option<qlh::exactalg::Poly<qlh::exactalg::Rational>>| p.as_ref().map(|p| p.render(&["d"]));
    let _ = writeln!(text, "degree bound {} ({})", rep.degree_bound, if rep.degree_within_bound() { "holds" } else { "exceeded" });
    Ok(Artifact {
        command: "regularize",
        pass: rep.pass(),
        mask: Mask::Window(lo, hi),
        result: json!({
            "step": 1,
            "W": w.rat.render(&["d"]),
            "lambda": rep.lambda,
            "unstable": [rep.unstable.0, rep.unstable.1],
            "polynomial_part": rep.polynomial_part.render(&["d"]),
            "interpolated": opt(&rep.polynomial),
            "flop_polynomial": opt(&rep.flop_polynomial),
            "degree_bound": rep.degree_bound,
            "degree_within_bound": rep.degree_within_bound(),
            "top_defect_opposite_sign_failures": rep.top_defect_opposite_sign_failures,
            "table": rows,
        }),
        failures,
        text,
    })
}

fn regularize2(sc: &Scenario, bs: &[i64], d2: i64, extra: i64) -> Result<Artifact, UsageError> {
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    let rep = partial_bf2(geo, bs, d2, extra, W0Quantization::Normalized)?;
    let second: BTreeMap<String, Value> = rep.second_series.iter().map(|(d, c)| (d.to_string(), class_json(&alg, c))).collect();
    let mut text = format!(
        "λ = {}, unstable {:?}, P(d) = {}\nfirst stable series: {}\ntrouble class: {}\n",
        rep.lambda,
        rep.unstable,
        rep.polynomial.render(&["d"]),
        if rep.first_series_nonzero.is_empty() { "vanishes".to_string() } else { format!("nonzero at {:?}", rep.first_series_nonzero) },
        class_text(&alg, &rep.trouble_class)
    );
    for (d, c) in &rep.second_series {
        let _ = writeln!(text, "z^-1 at d = {d}: {}", class_text(&alg, c));
    }
    Ok(Artifact {
        command: "regularize",
        pass: rep.first_series_nonzero.is_empty(),
        mask: Mask::Window(rep.window.0, rep.window.1),
        result: json!({
            "step": 2,
            "lambda": rep.lambda,
            "unstable": [rep.unstable.0, rep.unstable.1],
            "polynomial": rep.polynomial.render(&["d"]),
            "first_series_nonzero": rep.first_series_nonzero,
            "trouble_class": class_json(&alg, &rep.trouble_class),
            "second_series": second,
        }),
        failures: rep.first_series_nonzero.iter().map(|d| json!({"check": "first stable series", "d": d})).collect(),
        text,
    })
}

fn golden(sc: &Scenario, name: &str, nt: Notation) -> Result<Artifact, UsageError> {
    let gold = builtin(name).ok_or_else(|| UsageError(format!("no golden example {name:?}")))?;
    let geo = &sc.geometry;
    let alg = TotalAlgebra::new(geo);
    // the double-bundle golden data is written with the twisted lift
    let lift = if geo.is_double() { qlh::scenario::LiftChoice::Twisted } else { sc.lift };
    let sc = Scenario { lift, ..sc.clone() };
    let conn = connection_of(&sc)?;
    let mut got = BTreeMap::new();
    for (key, d) in gold.connection_keys() {
        got.insert(key, conn.matrix(d).clone());
    }
    let mut mask = Mask::Exact;
    let mut gauge_data = None;
    let gauge_keys: Vec<&String> = gold.matrices.keys().filter(|k| !gold.directions.contains_key(*k)).collect();
    if !gauge_keys.is_empty() {
        let g = gauge_of(&sc, &conn)?;
        for key in gauge_keys {
            let m = match key.as_str() {
                "B" => &g.b,
                "B_inv" => &g.b_inv,
                k => g.ct_for(k.strip_prefix("Ct_").and_then(dir_of).ok_or_else(|| UsageError(format!("unknown golden matrix {k}")))?),
            };
            got.insert(key.clone(), m.to_cmatrix());
        }
        mask = Mask::Weights(weights_upto(g.bound));
        gauge_data = Some(g);
    }
    let mut failures = Vec::new();
    let mut compared = 0;
    let mut text = String::new();
    for (key, m) in &got {
        let bad = gold.compare(key, m)?;
        compared += gold.entry_count(key);
        let _ = writeln!(text, "{key}: {} entries, {} mismatches", gold.entry_count(key), bad.len());
        for b in bad {
            failures.push(json!({"matrix": b.matrix, "row": b.row, "col": b.col, "expected": b.expected, "got": b.got}));
        }
    }
    if let Some(g) = &gauge_data {
        let inv = extract_invariants(&alg, geo, g, sc.trunc.dmax);
        for gi in &gold.invariants {
            let d = if gi.matrix.ends_with('h') { Dir::H } else { Dir::Base(0) };
            let want = gold.parse(&gi.value)?.expand(sc.weight_bound, sc.trunc.dmax);
            let found = want.len() == 1 && {
                let class = qlh::ifunc::class_of_lifted(geo, want[0].u, want[0].q1, want[0].q2);
                inv.iter().any(|i| i.dir == d && i.kappa + 1 == gi.row && i.nu + 1 == gi.col && i.class == class && i.value == want[0].c)
            };
            let _ = writeln!(text, "{}: {}", gi.label, if found { "match" } else { "MISMATCH" });
            if !found {
                failures.push(json!({"invariant": gi.label, "expected": gi.value}));
            }
        }
    }
    let rendered: BTreeMap<&String, Vec<Vec<String>>> = got.iter().map(|(k, m)| (k, matrix_strings(m, nt))).collect();
    Ok(Artifact {
        command: "golden",
        pass: failures.is_empty(),
        mask,
        result: json!({"example": name, "entries_compared": compared, "invariants": gold.invariants.len(), "matrices": rendered}),
        failures,
        text,
    })
}
