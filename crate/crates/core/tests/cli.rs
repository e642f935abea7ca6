use std::path::{Path, PathBuf};
use std::process::Command;

use minmc::harness::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_minmc"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const SMALL: &str = r#"{
  "name": "small",
  "model": {"model": "black_scholes", "spot": 100.0, "strike": 100.0, "maturity": 2.0, "vol_map": "affine01"},
  "space": {"bounds": [[0.0, 1.0]], "grid": [21]},
  "estimator": {"kind": "krr", "kernel": {"kind": "triangular"}},
  "lambdas": [0.01, 0.001],
  "n": 300,
  "reps": 3,
  "benchmark": {"type": "analytic"},
  "seed": 11,
  "outputs": {"curve": true, "curve_points": 50}
}"#;

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    std::fs::write(&path, SMALL).unwrap();
    path
}

#[test]
fn shipped_configs_parse_and_pass_the_budget_audit() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let config = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(!config.cells().unwrap().is_empty());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn case_study_output_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let run = |out: &str| {
        let status = bin()
            .args(["case-study", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(tmp.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    };
    run("a");
    run("b");
    for file in ["mse_raw.csv", "mse_summary.csv", "benchmark.csv", "curve.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    let raw = std::fs::read_to_string(tmp.path().join("a/mse_raw.csv")).unwrap();
    assert_eq!(raw.lines().next().unwrap(), "lambda,m,rep,mse");
    assert_eq!(raw.lines().count(), 1 + 2 * 3);
}

#[test]
fn seed_override_changes_the_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    for (seed, out) in [("1", "s1"), ("2", "s2")] {
        let status = bin()
            .args(["--seed", seed, "fit", "--save-samples", "--config"])
            .arg(&config)
            .arg("--out-dir")
            .arg(tmp.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(tmp.path().join("s1/samples.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("s2/samples.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn fit_then_curve_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let out = tmp.path().join("fit");
    let status = bin()
        .args(["fit", "--lambda", "0.001", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args(["curve", "--points", "11", "--fit"])
        .arg(out.join("fit.json"))
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        // 300 samples of a smooth curve: within a few price units everywhere.
        assert!((r[1] - r[2]).abs() < 5.0, "{r:?}");
    }
}

#[test]
fn theory_check_prints_passing_verdicts() {
    let out = bin().args(["--seed", "3", "theory-check"]).output().unwrap();
    assert!(out.status.success());
    let verdicts: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(verdicts.as_array().unwrap().len(), 4);
}

#[test]
fn bad_config_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, SMALL.replace("\"lambdas\": [0.01, 0.001]", "\"lambdas\": [-1.0]")).unwrap();
    let out = bin().args(["case-study", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
