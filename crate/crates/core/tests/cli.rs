//! End-to-end checks of the `evometric` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn evometric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evometric"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = evometric(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_prints_one_row_per_step() {
    let out = ok(&["simulate", "--model", "three-tanks"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# evometric "));
    assert!(text.contains("# seed: 0"));
    assert_eq!(data_rows(&text).len(), 151);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(evometric(&["simulate"]).status.code(), Some(2));
    assert_eq!(evometric(&["distance", "--model", "three-tanks", "--penalty", "l9"]).status.code(), Some(2));
    assert_eq!(evometric(&["simulate", "--model", "four-tanks"]).status.code(), Some(2));
    assert_eq!(evometric(&["simulate", "--model", "engine", "--attack", "act:R:1.8"]).status.code(), Some(2));
    assert_eq!(evometric(&["estimate", "--model", "three-tanks", "--steps", "5", "--obs-times", "0..9"]).status.code(), Some(2));
}

#[test]
fn emitted_samples_cover_every_run_and_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&["estimate", "--model", "three-tanks", "--steps", "12", "--samples", "7", "--emit-samples", "--out", d]);
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(data_rows(&samples).len(), 7 * 13);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(data_rows(&summary).len(), 6 * 13);
}

#[test]
fn distance_records_the_penalty_in_use() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["distance", "--model", "three-tanks", "--rhs-scenario", "2", "--steps", "20", "--samples", "50", "--penalty", "max3", "--out", d];
    ok(&args);
    let doc = json(&dir.path().join("distance.json"));
    assert_eq!(doc["params"]["penalty"], "max3");
    assert_eq!(doc["config"]["penalty"], "max3");
    assert_eq!(doc["config"]["rhs"]["params"]["scenario"], 2);
}

#[test]
fn identical_systems_with_shared_seeds_are_at_distance_zero() {
    let out = ok(&["distance", "--model", "three-tanks", "--steps", "30", "--samples", "40", "--scale", "1", "--seed", "5", "--seed2", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for row in data_rows(&text) {
        let w: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(w, 0.0, "row {row}");
    }
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    ok(&[
        "distance", "--model", "three-tanks", "--variant", "plus", "--rhs-variant", "minus", "--steps", "25", "--samples", "30",
        "--seed", "11", "--out", first.to_str().unwrap(),
    ]);
    let cfg = json(&first.join("distance.json"))["config"].clone();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    ok(&["distance", "--config", cfg_path.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    for f in ["distance.csv", "distance.json"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
    // explicit flags take precedence over the file
    let out = ok(&["distance", "--config", cfg_path.to_str().unwrap(), "--steps", "10"]);
    assert_eq!(data_rows(&String::from_utf8(out.stdout).unwrap()).len(), 11);
}

#[test]
fn reliability_is_adaptability_at_the_first_observation_time() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--model", "three-tanks", "--init", "ds", "--steps", "20", "--samples", "16", "--m", "4", "--seed", "3"];
    let mut xi0 = Vec::new();
    for cmd in ["adaptability", "reliability"] {
        let out = dir.path().join(cmd);
        let mut args = vec![cmd];
        args.extend(common);
        args.extend(["--out", out.to_str().unwrap()]);
        ok(&args);
        let doc = json(&out.join("report.json"));
        xi0.push(doc["xi"]["xi"][0].as_f64().unwrap());
    }
    assert_eq!(xi0[0], xi0[1]);
}

#[test]
fn verdict_queries_are_labelled_with_the_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = ok(&[
        "adaptability", "--model", "three-tanks", "--init", "ds", "--steps", "20", "--samples", "16", "--m", "4", "--query", "10:1.0",
        "--out", d,
    ]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("at M=4 samples"), "{stderr}");
    let doc = json(&dir.path().join("report.json"));
    assert_eq!(doc["verdicts"].as_array().unwrap().len(), 1);
}

#[test]
fn manifest_lists_engine_encodings() {
    let out = ok(&["manifest", "--model", "engine"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["encodings"]["cool"]["on"], 1.0);
    assert_eq!(doc["model"], "engine");
    assert!(doc["penalties"].as_array().unwrap().iter().any(|p| p == "fn_L"));
}
