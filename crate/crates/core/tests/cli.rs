//! The `carnot` binary: artefacts, formats, exit codes and sweeps.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[[scenario]]
name = "small"
model = { family = "abelian_box", dimension = 1 }
chart = { cells = [200], half = 4.0 }
curvature = { kind = "constant", c = 1.0 }
suite = ["w_contraction", "evi"]
time_grid = [0.05, 0.1]

[[scenario.measures]]
name = "a"
measure = { kind = "gaussian", center = [-0.5], sigma = 0.3 }

[[scenario.measures]]
name = "b"
measure = { kind = "gaussian", center = [0.7], sigma = 0.4 }

[scenario.settings.contraction]
pairs = [["a", "b"]]

[scenario.settings.evi]
pairs = [["a", "b"]]
time_pairs = [[0.05, 0.05], [0.05, 0.1]]
"#;

fn carnot(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carnot"))
        .args(args)
        .current_dir(dir)
        .env_remove("CARNOT_OUT_DIR")
        .env_remove("CARNOT_JOBS")
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

#[test]
fn run_writes_every_artefact() {
    let dir = setup();
    let out = carnot(&["run", "small.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["reports.json", "reports.csv", "c_hat.csv", "config.resolved.toml", "summary.json"] {
        assert!(dir.path().join("o").join(f).exists(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["counts"]["fail"], 0);
    assert_eq!(summary["config_sha256"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(dir.path().join("o/reports.csv")).unwrap();
    assert!(csv.starts_with("name,anchor,case,"));
    // the resolved config runs to the same reports
    let again = carnot(&["run", "o/config.resolved.toml", "--out", "p"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(dir.path().join("o/reports.json")).unwrap(), std::fs::read(dir.path().join("p/reports.json")).unwrap());
}

#[test]
fn format_and_suite_selection() {
    let dir = setup();
    let out = carnot(&["run", "small.toml", "--out", "j", "--format", "json", "--suite", "evi"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("j/reports.json").exists());
    assert!(!dir.path().join("j/reports.csv").exists());
    let reports: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("j/reports.json")).unwrap()).unwrap();
    let names: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"evi"));
    assert!(!names.contains(&"w_contraction"));
}

#[test]
fn errors_exit_with_one() {
    let dir = setup();
    let out = carnot(&["run", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(dir.path().join("broken.toml"), "[[scenario]]\nname = \"x\"\nmodel = 5\n").unwrap();
    let out = carnot(&["run", "broken.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.toml:3:"));
    let out = carnot(&["run", "small.toml", "--suite", "unknown"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn violated_curvature_exits_with_two() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.toml"), SMALL.replace("c = 1.0", "c = 0.5")).unwrap();
    let out = carnot(&["run", "bad.toml", "--out", "b"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_a_table_per_value() {
    let dir = setup();
    let out = carnot(&["sweep", "small.toml", "--out", "s", "--suite", "w_contraction", "--param", "cells", "--values", "100,200"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("s/cells=100/reports.json").exists());
    assert!(dir.path().join("s/cells=200/reports.json").exists());
    let table = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert!(table.lines().count() > 2);
}
