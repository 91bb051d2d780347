use std::path::Path;
use std::process::{Command, Output};

const QUICK_CONFIG: &str = "tune = false\n[gbt]\nmax_depth = 3\nn_rounds = 30\nmin_child_weight = 20.0\n";

fn fourthdown(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fourthdown"))
        .arg("--quiet")
        .args(args)
        .env_remove("FOURTHDOWN_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = fourthdown(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = fourthdown(&["simulate", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(fourthdown(&[]).status.code(), Some(2));
}

#[test]
fn invalid_flag_values_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = fourthdown(&["simulate", "--games", "0", "--seed", "1", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.csv").exists());

    let out = fourthdown(&[
        "recommend", "--ensemble", s(dir.path()), "--yardline", "10", "--ydstogo", "15", "--seconds", "900", "--score-diff", "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ydstogo exceeds yardline"));
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = fourthdown(&[
        "recommend", "--ensemble", s(&dir.path().join("missing")), "--yardline", "36", "--ydstogo", "2", "--seconds", "900",
        "--score-diff", "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["simulate", "--games", "20", "--seed", "7", "--out", s(&a)]);
    ok(&["simulate", "--games", "20", "--seed", "7", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.run.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn fit_bootstrap_recommend_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    std::fs::write(p("quick.toml"), QUICK_CONFIG).unwrap();
    let cfg = p("quick.toml");
    ok(&["simulate", "--games", "120", "--seed", "5", "--out", s(&p("hist.csv"))]);
    ok(&["--config", s(&cfg), "bootstrap", "--data", s(&p("hist.csv")), "--B", "5", "--seed", "2", "--out", s(&p("ens"))]);
    assert!(p("ens/manifest.json").exists());
    assert!(p("ens/run.json").exists());

    let ens = p("ens");
    let state = ["--yardline", "36", "--ydstogo", "2", "--seconds", "445", "--score-diff", "-3"];
    let mut args = vec!["recommend", "--ensemble", s(&ens)];
    args.extend(state);
    let text = String::from_utf8(ok(&args).stdout).unwrap();
    for needle in ["go", "fg", "punt", "boot%"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }

    args.extend(["--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&ok(&args).stdout).unwrap();
    assert_eq!(json["report"]["gains"].as_array().unwrap().len(), 5);

    let grid = p("grid.csv");
    let mut args = vec!["boundary", "--ensemble", s(&ens), "--seconds", "445", "--score-diff", "-3"];
    args.extend(["--yardlines", "30-40", "--ydstogo", "1-5", "--mode", "boot", "--out", s(&grid)]);
    ok(&args);
    let csv = std::fs::read_to_string(&grid).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11 * 5);
}
