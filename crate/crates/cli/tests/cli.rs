use qlh::exactalg::{base_symbols, parse_coeff};
use qlh::golden::builtin;
use qlh::lerayhirsch::assemble_connection;
use qlh::scenario::{LiftChoice, Scenario};
use qlh_cli::load_scenario;
use qlh_cli::render::{matrix_strings, Notation};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn qlh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlh")).args(args).output().expect("binary runs")
}

/// Runs a command into a fresh directory; returns exit code, JSON, text.
fn run_to_dir(args: &[&str]) -> (i32, Value, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut a: Vec<&str> = args.to_vec();
    let out = dir.path().to_str().unwrap().to_string();
    a.extend(["--out", &out]);
    let o = qlh(&a);
    let code = o.status.code().unwrap();
    let name = args[0];
    let js = std::fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap_or_else(|_| panic!("{name}: {o:?}"));
    let txt = std::fs::read_to_string(dir.path().join(format!("{name}.txt"))).unwrap();
    (code, serde_json::from_str(&js).unwrap(), txt)
}

#[test]
fn bundled_scenarios_load_and_match_the_builtins() {
    for name in ["hirzebruch", "p1flop_00_01", "p1flop_1m4_00", "simple_r2"] {
        let sc = load_scenario(&scenario_file(name)).unwrap();
        let b = Scenario::builtin(name).unwrap();
        assert_eq!(sc.name, b.name);
        assert_eq!(sc.geometry, b.geometry);
    }
}

#[test]
fn golden_examples_pass() {
    for name in ["hirzebruch", "p1flop_00_01"] {
        let (code, js, txt) = run_to_dir(&["golden", name]);
        assert_eq!(code, 0, "{name}: {txt}");
        assert_eq!(js["pass"], true);
        assert!(js["failures"].as_array().unwrap().is_empty());
        assert!(js["result"]["entries_compared"].as_u64().unwrap() >= 32);
    }
}

#[test]
fn golden_mismatch_exits_one_with_a_report() {
    // B needs weight (1, 0); bound 0 leaves it unresolved
    let (code, js, _) = run_to_dir(&["golden", "hirzebruch", "--weight-bound", "0"]);
    assert_eq!(code, 1);
    assert_eq!(js["pass"], false);
    let f = &js["failures"][0];
    assert_eq!((f["matrix"].as_str(), f["row"].as_u64(), f["col"].as_u64()), (Some("B"), Some(2), Some(4)));
}

#[test]
fn pf_check_residuals_vanish() {
    for name in ["hirzebruch", "p1flop_00_01"] {
        let f = scenario_file(name);
        let (code, js, _) = run_to_dir(&["pf-check", "--scenario", f.to_str().unwrap()]);
        assert_eq!(code, 0);
        for (_, table) in js["result"]["residuals"].as_object().unwrap() {
            let statuses: Vec<&str> = table.as_object().unwrap().values().map(|v| v.as_str().unwrap()).collect();
            assert!(statuses.contains(&"zero"));
            assert!(!statuses.contains(&"nonzero"));
        }
    }
}

#[test]
fn every_artifact_embeds_its_mask() {
    let f = scenario_file("p1flop_00_01");
    let f = f.to_str().unwrap();
    let cases: [(&[&str], &str); 8] = [
        (&["ifunc"], "classes"),
        (&["pf-check"], "classes"),
        (&["connection"], "exact"),
        (&["gauge"], "weights"),
        (&["mirror-map"], "classes"),
        (&["invariants"], "weights"),
        (&["flop-check"], "weights"),
        (&["regularize", "--beta-s", "1"], "fiber_window"),
    ];
    for (args, kind) in cases {
        let mut a = args.to_vec();
        a.extend(["--scenario", f]);
        let (code, js, _) = run_to_dir(&a);
        assert_eq!(code, 0, "{args:?}");
        assert_eq!(js["resolved_mask"]["kind"], kind, "{args:?}");
        assert_eq!(js["scenario"]["name"], "p1flop_00_01");
    }
}

#[test]
fn output_is_deterministic() {
    let f = scenario_file("p1flop_00_01");
    for cmd in ["connection", "mirror-map"] {
        let a = qlh(&[cmd, "--scenario", f.to_str().unwrap()]);
        let b = qlh(&[cmd, "--scenario", f.to_str().unwrap()]);
        assert!(a.status.success());
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn regularize_reports_the_first_step_table() {
    let f = scenario_file("p1flop_1m4_00");
    let (code, js, txt) = run_to_dir(&["regularize", "--scenario", f.to_str().unwrap(), "--beta-s", "1"]);
    assert_eq!(code, 0, "{txt}");
    let r = &js["result"];
    assert_eq!(r["lambda"], -3);
    assert_eq!(r["polynomial_part"], "d - 7");
    let table = r["table"].as_array().unwrap();
    assert!(table.iter().all(|row| row["defect"] == "0"));
    let at = |d: i64| table.iter().find(|row| row["d"] == d).unwrap();
    assert_eq!((at(-1)["reg"].as_str(), at(0)["reg"].as_str()), (Some("-2"), Some("17")));
    // second step
    let (code, js, _) = run_to_dir(&["regularize", "--scenario", f.to_str().unwrap(), "--beta-s", "1", "--step", "2"]);
    assert_eq!(code, 0);
    assert!(js["result"]["first_series_nonzero"].as_array().unwrap().is_empty());
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"name":"x","r":1,"base":"p1","f_degrees":[[0]],"fp_degrees":null}"#, "f_degrees"),
        (r#"{"name":"x","r":"one","base":"p1","f_degrees":[[0],[1]],"fp_degrees":null}"#, "at r"),
        (r#"{"name":"x","r":1,"base":"p1","f_degrees":[[0],[1]],"fp_degrees":null,"box":{"bs":1,"d2":"x","dmax":2}}"#, "box.d2"),
        (r#"{"name":"x","r":1,"base":"p1","f_degrees":[[0],[1]],"fp_degrees":null,"box":{"bs":1,"d2":0,"dmax":-1}}"#, "box.dmax"),
    ];
    for (k, (src, field)) in cases.iter().enumerate() {
        let p = dir.path().join(format!("s{k}.json"));
        std::fs::write(&p, src).unwrap();
        let o = qlh(&["ifunc", "--scenario", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{field}: {err}");
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["frobnicate"],
        vec!["ifunc"],
        vec!["ifunc", "--scenario", "/nonexistent/scenario.json"],
        vec!["ifunc", "--scenario", "hirzebruch", "--box", "1,2"],
        vec!["regularize", "--scenario", "p1flop_1m4_00", "--step", "3"],
        vec!["regularize", "--scenario", "simple_r2", "--step", "2"],
        vec!["flop-check", "--scenario", "hirzebruch"],
        vec!["golden", "nowhere"],
    ] {
        assert_eq!(qlh(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn abbreviated_entries_parse_back() {
    // r odd through the checked-in symbol table
    let gold = builtin("p1flop_00_01").unwrap();
    let sc = Scenario::p1flop_00_01();
    let conn = assemble_connection(&sc.geometry, LiftChoice::Twisted).unwrap();
    for m in &conn.mats {
        let cells = matrix_strings(m, Notation { r: 1, abbreviate: true });
        for (i, row) in cells.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                assert_eq!(gold.parse(s).unwrap(), m[i][j], "{s}");
            }
        }
    }
    // r even, where f = q1/(1+q1)
    let mut syms = base_symbols();
    syms.insert("f".into(), parse_coeff("q1/(1+q1)", &syms).unwrap());
    syms.insert("g".into(), parse_coeff("u/(1-u)", &syms).unwrap());
    let sc = Scenario::simple_flop(2);
    let conn = assemble_connection(&sc.geometry, LiftChoice::Iminimal).unwrap();
    let mut abbreviated = 0;
    for m in &conn.mats {
        for (i, row) in matrix_strings(m, Notation { r: 2, abbreviate: true }).iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                assert_eq!(parse_coeff(s, &syms).unwrap(), m[i][j], "{s}");
                abbreviated += s.contains('f') as usize;
            }
        }
    }
    assert!(abbreviated > 0);
}

#[test]
fn expand_abbrev_prints_plain_entries() {
    let (_, js, txt) = run_to_dir(&["connection", "--scenario", "p1flop_00_01", "--direction", "h", "--expand-abbrev"]);
    assert_eq!(js["result"]["abbreviated"], false);
    assert!(!txt.contains('f'), "{txt}");
    let (_, js, txt) = run_to_dir(&["connection", "--scenario", "p1flop_00_01", "--direction", "h"]);
    assert_eq!(js["result"]["abbreviated"], true);
    assert!(txt.contains("-2*f"));
    assert_eq!(js["result"]["matrices"].as_object().unwrap().len(), 1);
}
