use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gaugetherm"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("JSON error on stderr");
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

const QUBIT: &str = r#"{
  "schema": 1,
  "model": {"kind": "qdbc_decay", "omega0": 1.0, "beta": 1.0, "gamma": 0.5},
  "initial_state": "maximally_mixed",
  "time": {"t0": 0.0, "t1": 1.0, "steps": 100}
}"#;

#[test]
fn every_bundled_config_validates() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["ok"], Value::Bool(true));
    }
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.json", QUBIT);
    let out = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["model"], "qdbc_decay");
    let csv = std::fs::read_to_string(dir.path().join("q.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,energy,J_total,J_mu_"));
    assert!(header.ends_with("S,dS_dt,Sigma,E_rate,E_thermal"));
    assert_eq!(lines.count(), 101);
    let q = summary["gauges"][0]["ledger"]["Q"].as_f64().unwrap();
    assert!(q < 0.0);
}

#[test]
fn unknown_fields_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let body = QUBIT.replace("\"gamma\": 0.5", "\"gamma\": 0.5, \"colour\": 1");
    let cfg = write(dir.path(), "bad.json", &body);
    let out = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = error_of(&out);
    assert_eq!(err["kind"], "schema");
    assert_eq!(err["exit_code"], 1);
}

#[test]
fn odd_step_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "odd.json", &QUBIT.replace("\"steps\": 100", "\"steps\": 101"));
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["path"], "time.steps");
}

#[test]
fn empty_sweeps_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = QUBIT.replace(
        "\"steps\": 100}",
        "\"steps\": 100}, \"sweep\": {\"parameter\": \"model.gamma\", \"values\": []}",
    );
    let cfg = write(dir.path(), "sweep.json", &body);
    let out = bin().arg("sweep").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn loss_of_positivity_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
      "schema": 1,
      "model": {
        "kind": "inline", "dim": 2,
        "hamiltonian": [[0, 0], [0, 0]],
        "channels": [{"operator": [[0, 2], [0, 0]]}],
        "signature": [-1]
      },
      "initial_state": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]],
      "time": {"t0": 0.0, "t1": 3.0, "steps": 300}
    }"#;
    let cfg = write(dir.path(), "anti.json", body);
    let out = bin().arg("simulate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_of(&out)["kind"], "numerical");
}

#[test]
fn sweeps_keep_value_order_for_any_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let body = QUBIT.replace(
        "\"steps\": 100}",
        "\"steps\": 100}, \"sweep\": {\"parameter\": \"model.gamma\", \"values\": [0.1, 0.4, 0.9, 1.3]}",
    );
    let cfg = write(dir.path(), "sweep.json", &body);
    let run = |jobs: &str| {
        let out = bin().args(["--jobs", jobs, "sweep"]).arg(&cfg).output().unwrap();
        assert!(out.status.success());
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let v: Value = serde_json::from_slice(&one).unwrap();
    let values: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert_eq!(values, [0.1, 0.4, 0.9, 1.3]);
}

#[test]
fn maser_gauges_need_the_maser() {
    let dir = tempfile::tempdir().unwrap();
    let body = QUBIT.replace(
        "\"steps\": 100}",
        "\"steps\": 100}, \"gauges\": [{\"kind\": \"maser\", \"family\": \"shifting\"}]",
    );
    let cfg = write(dir.path(), "g.json", &body);
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["path"], "gauges[0]");
}
