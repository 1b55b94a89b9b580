use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn turlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turlab"))
        .args(args)
        .env_remove("TURLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_suites_pass_and_fault_injection_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("verify.json");
    let out = turlab(&["verify", "--trials", "20", "--json", json.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report: Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["suites"].as_array().unwrap().len(), 5);

    let out = turlab(&["verify", "--suite", "qfi", "--trials", "100"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("100 checks"));

    let out = turlab(&[
        "verify",
        "--suite",
        "scaling",
        "--trials",
        "10",
        "--inject-fault",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scaling"));

    let out = turlab(&["verify", "--suite", "bogus"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn experiment_writes_deterministic_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = turlab(&[
            "experiment",
            "--seed",
            "7",
            "--trials",
            "5",
            "--shots",
            "0",
            "--variants",
            "exact",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out_dir
    };
    let a = run("a");
    let b = run("b");
    for name in ["trials.csv", "trials.json", "summary.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let csv = fs::read_to_string(a.join("trials.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("trial_id,gamma,theta_1,"));
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "violated_exact").unwrap();
    for row in &lines[1..] {
        assert_eq!(row.split(',').nth(col), Some("false"));
    }

    let manifest: Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    let mut names: Vec<&str> = outputs
        .iter()
        .map(|o| o["path"].as_str().unwrap())
        .collect();
    names.sort_unstable();
    assert_eq!(names, ["summary.json", "trials.csv", "trials.json"]);
    let other: Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"], other["outputs"]);
    assert_eq!(manifest["config_sha256"], other["config_sha256"]);

    let summary: Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["exact"]["violations"], 0);
    assert!(summary["summary"].get("runtime").is_none());
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = turlab(&[
        "experiment",
        "--seed",
        "3",
        "--trials",
        "4",
        "--shots",
        "200",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let records: Value =
        serde_json::from_slice(&fs::read(out_dir.join("trials.json")).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(out_dir.join("trials.csv")).unwrap();
    let header = reader.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for (row, rec) in reader.records().zip(records.as_array().unwrap()) {
        let row = row.unwrap();
        for (column, value) in [
            ("c_real_exact", &rec["exact"]["c_real"]),
            ("upper_approx", &rec["approx"]["upper"]),
            ("q_ab_sampled", &rec["sampled"]["values"]["q_ab"]),
            ("gamma", &rec["inputs"]["gamma"]),
        ] {
            let from_csv: f64 = row[col(column)].parse().unwrap();
            let from_json = value.as_f64().unwrap();
            assert!(
                (from_csv - from_json).abs() <= 1e-12 * from_json.abs().max(1.0),
                "{column}"
            );
        }
    }
}

#[test]
fn experiment_rejects_bad_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let out = turlab(&[
        "experiment",
        "--gamma-max",
        "1.5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = turlab(&[
        "experiment",
        "--variants",
        "exact,magic",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

const AMPLITUDE_DAMPING: &str = r#"{
  "channel": {"kraus": [
    [[[1, 0], [0, 0]], [[0, 0], [0.7071067811865476, 0]]],
    [[[0, 0], [0.7071067811865476, 0]], [[0, 0], [0, 0]]]
  ]},
  "rho": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]],
  "a": "Z",
  "b": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]
}"#;

#[test]
fn bound_for_amplitude_damping() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "ad.json", AMPLITUDE_DAMPING);
    let out = turlab(&["bound", "--spec", &spec]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["bound"]["correlator"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(report["bound"]["holds"], true);
    assert!(report["tur"]["holds"].as_bool().unwrap());
}

#[test]
fn bound_for_identity_channel_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "id.json",
        r#"{"channel": {"unitary": [[1, 0], [0, 1]], "dims": [2, 1]},
            "rho": [[0.5, 0.5], [0.5, 0.5]], "a": "X", "b": "Z"}"#,
    );
    let out = turlab(&["bound", "--spec", &spec]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tur"]["degenerate"], true);
    assert_eq!(report["tur"]["lhs"], Value::Null);
    assert!(report["bound"]["xi_b"].as_f64().unwrap().abs() < 1e-14);
}

#[test]
fn malformed_spec_names_the_offending_row() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "bad.json",
        r#"{"channel": {"kraus": [[[1, 0], [0, 1]]]},
            "rho": [[[1, 0], [0, 0]], [[0, 0]]], "a": "Z", "b": "Z"}"#,
    );
    let out = turlab(&["bound", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rho[1]"), "{err}");
}

#[test]
fn singular_no_jump_operator_is_a_degeneracy() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "dead.json",
        r#"{"channel": {"kraus": [[[1, 0], [0, 0]], [[0, 1], [0, 0]]]},
            "rho": [[0.5, 0], [0, 0.5]], "a": "Z", "b": "Z"}"#,
    );
    let out = turlab(&["bound", "--spec", &spec]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular"));
}
