use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use feederopt::milp::{export_mps, MathProgram, Sense};

fn feederopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feederopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    format!("{}/data/{name}.feeder.json", env!("CARGO_MANIFEST_DIR"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a frozen file; `FEEDEROPT_BLESS=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("FEEDEROPT_BLESS").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    if actual != expected {
        let (k, (a, e)) = actual
            .lines()
            .zip(expected.lines())
            .enumerate()
            .find(|(_, (a, e))| a != e)
            .unwrap_or((0, ("<length>", "<length>")));
        panic!("{name} differs from the golden copy at line {}:\n  got      {a}\n  expected {e}", k + 1);
    }
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn solve_into(dir: &Path, feeder: &str, extra: &[&str]) -> Output {
    let feeder = data(feeder);
    let mut args = vec!["solve", "--feeder", &feeder, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    feederopt(&args)
}

#[test]
fn solve_writes_four_artifacts_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "feeder_smoke_4bus", &["--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for f in ["solution.json", "voltages.csv", "pv_dispatch.csv", "iterations.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let log = text(&out);
    assert!(log.contains("PASS nodal power residual"));
    assert!(!log.contains("FAIL"));
    let voltages = fs::read_to_string(dir.path().join("voltages.csv")).unwrap();
    assert!(voltages.starts_with("bus,phase,v_re,v_im,v_hat,v_sweep\n"));
    // 4 buses × 3 phases plus the header.
    assert_eq!(voltages.lines().count(), 13);
}

#[test]
fn floats_use_fixed_scientific_format() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into(dir.path(), "feeder_smoke_4bus", &[]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("pv_dispatch.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let p = row.split(',').nth(2).unwrap();
    // d.ddddddddde±XX
    assert_eq!(p.len(), if p.starts_with('-') { 16 } else { 15 }, "{p}");
    assert!(p.contains("e-") || p.contains("e+"), "{p}");
}

#[test]
fn nodroop_leaves_zone_column_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "feeder_smoke_4bus", &["--mode", "nodroop"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = fs::read_to_string(dir.path().join("pv_dispatch.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let zone = header.iter().position(|h| *h == "zone").unwrap();
    for line in lines {
        assert_eq!(line.split(',').nth(zone), Some(""), "{line}");
    }
}

#[test]
fn repeated_solves_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(solve_into(d.path(), "feeder_smoke_4bus", &[]).status.code(), Some(0));
    }
    for f in ["solution.json", "voltages.csv", "pv_dispatch.csv", "iterations.csv"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn missing_feeder_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = feederopt(&["solve", "--feeder", "/nonexistent/x.feeder.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("not found"), "{}", text(&out));
}

#[test]
fn unknown_subcommand_and_help() {
    assert_eq!(feederopt(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(feederopt(&["--help"]).status.code(), Some(0));
    assert_eq!(feederopt(&["solve", "--help"]).status.code(), Some(0));
}

#[test]
fn bundled_name_resolves_without_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = feederopt(&["export", "--feeder", "feeder_smoke_4bus", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
}

#[test]
fn infeasible_feeder_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // 3 MW over a long single-phase line cannot stay above 0.95 pu.
    let feeder = r#"{"schema_version": 1, "name": "overloaded", "base": {"s_base_va": 1000000, "default_kv": 2.4018},
      "buses": [{"id": "S", "phases": "a"}, {"id": "E", "phases": "a"}],
      "lines": [{"id": "L", "from": "S", "to": "E", "phases": "a", "units": "pu", "z": [[[0.05, 0.1]]], "ampacity": {"a": 10}}],
      "loads": [{"id": "D", "bus": "E", "p": {"a": 3000000}, "q": {"a": 1000000}}],
      "substations": [{"id": "SUB", "bus": "S", "v_slack": {"a": 1}, "price": 40}]}"#;
    let path = dir.path().join("overloaded.feeder.json");
    fs::write(&path, feeder).unwrap();
    let out = feederopt(&[
        "solve",
        "--feeder",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out));
}

#[test]
fn iteration_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "feeder_smoke_4bus", &["--max-iters", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
}

#[test]
fn nodroop_at_high_load_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let out = solve_into(dir.path(), "feeder_unbalanced_13_high_load", &["--mode", "nodroop", "--verify"]);
    assert_eq!(out.status.code(), Some(4), "{}", text(&out));
    assert!(text(&out).contains("FAIL droop curve deviation"));
}

#[test]
fn perturbed_solution_names_the_bus() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(solve_into(dir.path(), "feeder_smoke_4bus", &[]).status.code(), Some(0));
    let path = dir.path().join("solution.json");
    let mut sol: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let pv = &mut sol["pvs"][0];
    assert_eq!(pv["bus"], "B4");
    pv["p"] = serde_json::json!(pv["p"].as_f64().unwrap() + 0.05);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&sol).unwrap()).unwrap();

    let feeder = data("feeder_smoke_4bus");
    let ok = feederopt(&["verify", "--feeder", &feeder, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", text(&ok));
    let out = feederopt(&["verify", "--feeder", &feeder, "--solution", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", text(&out));
    let log = text(&out);
    let line = log.lines().find(|l| l.starts_with("FAIL nodal power residual")).expect("residual fails");
    assert!(line.contains("bus B4."), "{line}");
}

#[test]
fn compare_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = data("feeder_smoke_4bus");
    let out = feederopt(&["compare", "--feeder", &feeder, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(csv.starts_with("quantity,pv,phase,droop,nodroop\nobjective,"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("deviation,PV4,")).count(), 3);
}

#[test]
fn golden_one_variable_mps() {
    let mut p = MathProgram::new("one");
    let x = p.add_var("x", 0.0, 4.0);
    p.add_constraint("cap", [(x, 2.0)], Sense::Le, 5.0);
    p.set_objective(x, -1.0);
    check_golden("one_variable.mps", &export_mps(&p));
}

#[test]
fn golden_smoke_droop_mps() {
    let dir = tempfile::tempdir().unwrap();
    let feeder = data("feeder_smoke_4bus");
    let out = feederopt(&["export", "--feeder", &feeder, "--mode", "droop", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let mps = fs::read_to_string(dir.path().join("model.mps")).unwrap();
    assert_eq!(mps.matches("'MARKER'").count(), 2);
    check_golden("smoke_droop.mps", &mps);
}
