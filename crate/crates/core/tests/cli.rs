use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swipt-das"))
        .args(args)
        .current_dir(dir)
        .env_remove("SWIPT_DAS_SEED")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn solve_writes_result_document() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "i.json",
        r#"{"gains":[1,2],"harvest":[8,1],"p_max":10,"eta":0.8}"#,
    );
    let out = run(dir.path(), &["solve", "i.json", "--out", "r/result.json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r/result.json")).unwrap())
            .unwrap();
    for field in [
        "scenario",
        "powers",
        "charge",
        "discharge",
        "states",
        "sum_state",
        "kappa_g",
        "kappa_l",
        "classification",
        "objective",
    ] {
        assert!(doc.get(field).is_some(), "missing {field}");
    }
    // results come back in file order: the stronger RAU is the second one
    let powers = doc["powers"].as_array().unwrap();
    assert!(powers[1].as_f64().unwrap() > powers[0].as_f64().unwrap());
    assert_eq!(doc["scenario"], "Neutral");
    let ratio = doc["kappa_l"].as_f64().unwrap() / doc["kappa_g"].as_f64().unwrap();
    assert!((ratio - 0.64).abs() < 1e-12);
}

#[test]
fn solve_single_rau_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "i.json",
        r#"{"gains":[1],"harvest":[3],"p_max":5,"eta":0.9}"#,
    );
    let out = run(dir.path(), &["solve", "i.json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["sum_state"].is_number());
    assert!(doc["scenario"].is_string());
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "bad.json",
        r#"{"gains":[1,2],"harvest":[1,"x"],"p_max":5,"eta":0.8}"#,
    );
    let out = run(dir.path(), &["solve", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("harvest[1]"));

    write(
        dir.path(),
        "both.json",
        r#"{"harvest":[1],"p_max":5,"eta":0.8}"#,
    );
    let out = run(dir.path(), &["solve", "both.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_csv_layout_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"n_values":[2,4],"trials":20,"policies":["optimal","greedy"]}"#,
    );
    let out = run(
        dir.path(),
        &["sweep", "--config", "c.json", "--out", "s.csv"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,m,p_max,eta,policy,mean_objective,mean_wit,mean_wet,trials,seed"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("2,4,5,0.8,optimal,"));

    let out = run(
        dir.path(),
        &[
            "--seed", "9", "sweep", "--config", "c.json", "--out", "t.csv",
        ],
    );
    assert!(out.status.success());
    let other = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(other.lines().nth(1).unwrap().ends_with(",20,9"));
    assert_ne!(text, other);

    let out = Command::new(env!("CARGO_BIN_EXE_swipt-das"))
        .args(["sweep", "--config", "c.json", "--out", "u.csv"])
        .current_dir(dir.path())
        .env("SWIPT_DAS_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(other, fs::read_to_string(dir.path().join("u.csv")).unwrap());
}

#[test]
fn compare_reports_dominance() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "c.json",
        r#"{"n_values":[4],"trials":30,"policies":["optimal","greedy","waterfilling"]}"#,
    );
    let out = run(
        dir.path(),
        &["compare", "--config", "c.json", "--out", "cmp.csv"],
    );
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert!(text.starts_with(
        "n,m,p_max,eta,policy,mean_objective,mean_wit,mean_wet,dominance_violations,trials,seed\n"
    ));
    for row in text.lines().skip(1) {
        assert_eq!(row.split(',').nth(8).unwrap(), "0");
    }

    write(dir.path(), "one.json", r#"{"trials":3}"#);
    let out = run(
        dir.path(),
        &["compare", "--config", "one.json", "--out", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn region_curve_and_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "i.json",
        r#"{"gains":[1,0.5,0.25],"harvest":[2,4,1],"p_max":5,"eta":0.8}"#,
    );
    let out = run(
        dir.path(),
        &[
            "region", "i.json", "--points", "10", "--out", "reg.csv", "--qmin", "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("reg.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[9], vec![1.0, rows[9][1], 0.0]);
    assert!(rows
        .windows(2)
        .all(|w| w[1][1] >= w[0][1] && w[1][2] <= w[0][2]));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("qmin=1 rho="));

    let out = run(
        dir.path(),
        &[
            "region", "i.json", "--points", "10", "--out", "r.csv", "--qmin", "1e9",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_on_small_instances() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "v.json",
        r#"{"n_values":[1,2,3,4],"eta_values":[0.7,1.0],"trials":15}"#,
    );
    let out = run(dir.path(), &["verify", "--config", "v.json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["instances"], 120);
    assert_eq!(report["grid_checked"], 120);
}
