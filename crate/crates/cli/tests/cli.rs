// Smoke tests of the `posetduel` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posetduel")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["--version"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin(&["generate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn generate_writes_a_valid_poset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poset.json");
    let out = bin(&["generate", "--pareto", "5", "--width", "10", "--height", "10", "--seed", "7", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = posetduel::PosetModel::load(&path).unwrap();
    assert_eq!(m.arm_count(), 95);
    assert_eq!(m.pareto_front().to_vec(), vec![0, 1, 2, 3, 4]);

    let front = bin(&["front", "--poset", s(&path)]);
    assert_eq!(front.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&front.stdout).trim(), "[0,1,2,3,4]");
}

#[test]
fn invalid_generator_is_a_validation_error() {
    let out = bin(&["generate", "--pareto", "3", "--width", "2", "--height", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_poset_is_a_runtime_error() {
    let out = bin(&["front", "--poset", "/nonexistent/poset.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &config,
        r#"{"algorithm":"uniform","generator":{"pareto":2,"width":2,"height":3,"seed":0},
            "delta":0.05,"delta_gap":0.1,"seeds":[1,2]}"#,
    )
    .unwrap();
    let out = bin(&["run", "--algorithm", "unchained", "--config", s(&config), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("sweep_param,"));
    assert!(csv.contains("unchained"));
    assert!(out_dir.join("aggregate.csv").exists());
    let trace = out_dir.join("unchained_seed1.trace.json");
    let poset = out_dir.join("unchained_seed1.poset.json");
    assert!(trace.exists() && poset.exists());

    let report = bin(&["analyze", "--trace", s(&trace), "--poset", s(&poset)]);
    assert_eq!(report.status.code(), Some(0), "{}", String::from_utf8_lossy(&report.stderr));
    let v: serde_json::Value = serde_json::from_slice(&report.stdout).unwrap();
    assert!(v["budget"]["total"].as_f64().unwrap() >= v["observed_duels"].as_f64().unwrap());
}

#[test]
fn run_needs_an_algorithm_or_config() {
    assert_eq!(bin(&["run"]).status.code(), Some(1));
}

#[test]
fn dataset_runs_on_a_small_ratings_file() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("ratings.csv");
    let mut body = String::from("userId,movieId,rating,timestamp\n");
    for user in 0..20 {
        for item in 0..4 {
            let r = if item == 0 { 5.0 } else { 1.0 + (user % 3) as f64 };
            body.push_str(&format!("{user},{item},{r},0\n"));
        }
    }
    std::fs::write(&ratings, body).unwrap();
    let out = bin(&["dataset", "--ratings", s(&ratings), "--min-count", "10", "--eps", "0.1", "--delta", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("rank"));
}
