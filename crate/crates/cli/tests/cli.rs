use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wegnerflow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn with_spec(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SPIN: &str = r#"{"model": {"model": "spin", "s": 0.5, "b_field": [0.7071067811865476, 0.0, 0.7071067811865476]}}"#;

#[test]
fn flow_on_diagonal_matrix_converges_immediately() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(
        t.path(),
        "d.json",
        r#"{"matrix": {"dim": 2, "entries": [[[1,0],[0,0]],[[0,0],[-1,0]]]}}"#,
    );
    let out = t.path().join("out");
    let o = run(&["flow", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["stop_reason"], "converged");
    assert_eq!(s["l_final"].as_f64(), Some(0.0));
    assert!(out.join("trajectory.csv").exists());
    assert!(out.join("meta.json").exists());
}

#[test]
fn flow_matches_direct_eigenvalues() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(
        t.path(),
        "m.json",
        r#"{"matrix": {"dim": 2, "entries": [[[1,0],[0.5,0]],[[0.5,0],[0,0]]]}}"#,
    );
    let out = t.path().join("out");
    let o = run(&["flow", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&out.join("summary.json"));
    assert!(s["eigenvalue_match_error"].as_f64().unwrap() <= 1e-8);
    assert_eq!(s["stop_reason"], "converged");
}

#[test]
fn degenerate_diagonal_stalls_with_warning() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(
        t.path(),
        "s.json",
        r#"{"matrix": {"dim": 2, "entries": [[[0,0],[1,0]],[[1,0],[0,0]]]}}"#,
    );
    let out = t.path().join("out");
    let o = run(&["flow", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stderr(&o).contains("degenerate diagonal fixed point"),
        "{}",
        stderr(&o)
    );
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["stop_reason"], "stalled");
    assert_eq!(s["eta_norm_final"].as_f64(), Some(0.0));
    assert_eq!(
        s["degenerate_blocks"][0]["indices"],
        serde_json::json!([0, 1])
    );
    assert_eq!(
        s["degenerate_blocks"][0]["intra_offdiag_sq"].as_f64(),
        Some(2.0)
    );
}

#[test]
fn spec_errors_exit_2() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    let out = out.to_str().unwrap();
    for (name, json) in [
        ("bad.json", "{not json"),
        (
            "two.json",
            r#"{"model": {"model": "spin", "s": 0.5, "b_field": [1,0,0]}, "matrix": {"dim": 1, "entries": [[[0,0]]]}}"#,
        ),
        (
            "nh.json",
            r#"{"matrix": {"dim": 2, "entries": [[[0,0],[1,0]],[[2,0],[0,0]]]}}"#,
        ),
        (
            "spin.json",
            r#"{"model": {"model": "spin", "s": 0.7, "b_field": [1,0,0]}}"#,
        ),
    ] {
        let spec = with_spec(t.path(), name, json);
        let o = run(&["flow", "--spec", &spec, "--out", out]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "));
    }
    let o = run(&["flow", "--spec", "/nonexistent/spec.json", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integrator_failure_exits_3() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(
        t.path(),
        "f.json",
        r#"{"matrix": {"dim": 2, "entries": [[[0,0],[10,0]],[[10,0],[100,0]]]},
            "flow": {"l_max": 5, "sampling": {"kind": "uniform", "dl": 1},
                     "integrator": {"kind": "adaptive_rk45", "rtol": 1e-14, "atol": 1e-14, "min_step": 0.5, "max_step": 1}}}"#,
    );
    let o = run(&[
        "flow",
        "--spec",
        &spec,
        "--out",
        t.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("integrator failure"));
}

#[test]
fn geodesic_spin_passes() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(t.path(), "spin.json", SPIN);
    let out = t.path().join("out");
    let o = run(&["geodesic", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["case"], "B");
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for n in [
        "geodesic_residual",
        "variational_gradient",
        "xi_residual_relative",
        "generator_consistency",
    ] {
        assert!(names.contains(&n), "{n} missing");
    }
    assert!(out.join("geodesic.csv").exists());
}

#[test]
fn failing_check_is_data() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(
        t.path(),
        "tight.json",
        r#"{"model": {"model": "spin", "s": 0.5, "b_field": [0.7071067811865476, 0.0, 0.7071067811865476]},
            "tolerances": {"geodesic": 1e-12}}"#,
    );
    let out = t.path().join("out");
    let o = run(&["geodesic", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["all_pass"], false);
    let failed: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["geodesic_residual"]);
}

#[test]
fn erroring_check_exits_4() {
    // on resonance the sector pair is degenerate and the flow never moves
    let t = TempDir::new().unwrap();
    let spec = with_spec(
        t.path(),
        "jc.json",
        r#"{"model": {"model": "jc", "omega0": 1.0, "omega": 1.0, "kappa": 0.5, "n_max": 4}, "sector": 0}"#,
    );
    let out = t.path().join("out");
    let o = run(&["geodesic", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["stop_reason"], "stalled");
    assert!(!v["errors"].as_array().unwrap().is_empty());
}

#[test]
fn metric_scan_writes_verdict() {
    let t = TempDir::new().unwrap();
    let spec = with_spec(t.path(), "spin.json", SPIN);
    let out = t.path().join("out");
    let o = run(&["metric", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_json(&out.join("verdict.json"));
    assert!(v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));
    assert!(out.join("metric.csv").exists());
}

#[test]
fn condition_examples() {
    let o = run(&["condition", "--bands", "1", "--a", "1"]);
    assert_eq!(stdout(&o).trim(), "true");
    let o = run(&["condition", "--bands", "1,2", "--a", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "false (offender: band 2 = 2x)");
    let o = run(&["condition", "--bands", "2,5", "--a", "2"]);
    assert_eq!(stdout(&o).trim(), "true");
    let o = run(&["condition", "--bands", "2,5", "--a", "1"]);
    assert_eq!(stdout(&o).trim(), "true");
}

#[test]
fn condition_writes_report() {
    let t = TempDir::new().unwrap();
    let o = run(&[
        "condition",
        "--bands",
        "1,3",
        "--a",
        "1",
        "--out",
        t.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = read_json(&t.path().join("condition.json"));
    assert_eq!(v["holds"], false);
    assert_eq!(v["offender"]["band"], 3);
    assert_eq!(v["offender"]["multiple"], 3);
}

#[test]
fn malformed_band_list_exits_2() {
    for args in [
        &["condition", "--bands", "1,x", "--a", "1"][..],
        &["condition", "--bands", "0,1", "--a", "1"],
        &["condition", "--bands", "1,2", "--a", "3"],
        &["condition", "--bands", "", "--a", "1"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_subset_is_deterministic() {
    let t = TempDir::new().unwrap();
    let mut bodies = Vec::new();
    for k in 0..2 {
        let out = t.path().join(format!("run{k}"));
        let o = run(&[
            "verify-all",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--criteria",
            "1,2,3,9",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
        bodies.push(fs::read(out.join("verify.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let v: Value = serde_json::from_slice(&bodies[0]).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 7);
}

#[test]
fn corrupted_tolerance_names_the_check() {
    let t = TempDir::new().unwrap();
    let o = run(&[
        "verify-all",
        "--out",
        t.path().to_str().unwrap(),
        "--criteria",
        "1,3",
        "--tolerance-scale",
        "1e-30",
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("c1.eigenvalue_error"), "{}", stdout(&o));
    assert!(stderr(&o).contains("failed criteria: 1"), "{}", stderr(&o));
}

#[test]
fn full_suite_reports_named_checks() {
    let t = TempDir::new().unwrap();
    let o = run(&["verify-all", "--out", t.path().to_str().unwrap()]);
    let v = read_json(&t.path().join("verify.json"));
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 12);
    // the resonant Jaynes-Cummings sector cannot produce a geodesic: the flow is stationary
    assert_eq!(v["failed_criteria"], serde_json::json!([6]));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("failed criteria: 6"));
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(
        failed.iter().all(|n| n.starts_with("c6.jc_resonant.")),
        "{failed:?}"
    );
}
