use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_translator-lab"))
        .args(args)
        .env("TRANSLATOR_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

#[test]
fn limit_prints_json() {
    let out = run(&["limit", "--eps", "-1", "--n", "4", "--r", "3"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["L"].as_f64().unwrap() - 0.5636).abs() < 1e-4);
}

#[test]
fn parity_and_domain_errors_exit_2() {
    let out = run(&["catenoid", "--eps", "0", "--n", "4", "--r", "2", "--lambda", "0.5", "--variant", "odd"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["limit", "--eps", "0", "--n", "3", "--r", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["grim-reaper", "--eps", "-1", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bowl_round_trips_through_mesh_and_flow_check() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("bowl.json");
    let obj = dir.path().join("bowl.obj");
    let out = run(&[
        "bowl", "--eps", "0", "--n", "3", "--r", "2", "--s-max", "4", "--format", "json", "--out",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(&["mesh", "--in", json.to_str().unwrap(), "--segments", "16", "--out", obj.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = std::fs::read_to_string(&obj).unwrap();
    assert!(mesh.lines().any(|l| l.starts_with("v ")));
    assert!(mesh.lines().any(|l| l.starts_with("f ")));

    let out = run(&["flow-check", "--in", json.to_str().unwrap(), "--u", "0.01", "--steps", "10", "--h", "0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let drift: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(drift.is_finite() && drift < 1e-3, "drift {drift}");
}

#[test]
fn csv_goes_to_stdout() {
    let out = run(&["grim-reaper", "--eps", "0", "--n", "2", "--s-max", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() > 10);
}

#[test]
fn verify_exits_zero_on_a_passing_suite() {
    let out = run(&["verify", "--suite", "gluing", "--eps", "0", "--n", "3", "--r", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["entries"].as_array().unwrap().iter().all(|c| c["passed"] == Value::Bool(true)));
}
