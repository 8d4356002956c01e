//! End-to-end runs of the `edlab` binary: artifacts, restarts and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edlab::io::{parse_config, parse_config_str, read_checkpoint};
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn edlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edlab"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env("ED_LOG_LEVEL", "error")
        .output()
        .expect("run edlab")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

const FREE: &str = r#"
[grid]
spatial_dim = 1
points = 128
length = 32.0

[system]
masses = [1.0]

[initial]
kind = "gaussian"
centers = [[0.0]]
widths = 1.0
wavevectors = [0.5]

[solver]
dt = 0.01
steps = 40
record_stride = 10
checkpoint_stride = 20
"#;

#[test]
fn evolve_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("free_packet.toml");
    let out = edlab(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["observables.csv", "summary.json", "config.resolved.toml", "final.edwf", "checkpoints/step_00000000.edwf", "checkpoints/step_00000200.edwf"] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let csv = fs::read_to_string(dir.path().join("observables.csv")).unwrap();
    // header plus steps 0, 10, ..., 200
    assert_eq!(csv.lines().count(), 22);
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "evolve");
    assert_eq!(summary["constraint_check_passed"], true);
    let resolved = parse_config(&dir.path().join("config.resolved.toml")).unwrap();
    assert_eq!(resolved.solver.steps, 200);
}

#[test]
fn checkpoint_restart_continues_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = write_config(dir.path(), "first.toml", FREE);
    let out = edlab(&["evolve", "--config", first.to_str().unwrap()], &dir.path().join("a"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let saved = read_checkpoint(&dir.path().join("a/checkpoints/step_00000040.edwf")).unwrap();
    assert!((saved.state.time() - 0.4).abs() < 1e-12);

    let restart = FREE
        .replace("kind = \"gaussian\"\ncenters = [[0.0]]\nwidths = 1.0\nwavevectors = [0.5]", "kind = \"checkpoint\"\npath = \"a/checkpoints/step_00000040.edwf\"")
        .replace("checkpoint_stride = 20", "checkpoint_stride = 0");
    let second = write_config(dir.path(), "second.toml", &restart);
    let out = edlab(&["evolve", "--config", second.to_str().unwrap()], &dir.path().join("b"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("b/observables.csv")).unwrap();
    let t0: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((t0 - 0.4).abs() < 1e-12, "restart starts at t = {t0}");
}

#[test]
fn sample_and_parametrized_runs_succeed() {
    for (name, command) in [("trapped_ensemble.toml", "sample"), ("pair_lapse.toml", "parametrized"), ("vortex_rotation.toml", "best-match")] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = configs().join(name);
        let out = edlab(&[command, "--config", cfg.to_str().unwrap(), "--seed", "3"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["failed_checks"].as_array().map(Vec::len), Some(0), "{name}: {summary}");
    }
}

#[test]
fn seed_override_reaches_the_sampler() {
    let cfg = configs().join("trapped_ensemble.toml");
    let out = Command::new(env!("CARGO_BIN_EXE_edlab"))
        .args(["describe-config", "--seed", "99", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let resolved = parse_config_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(resolved.sampler.unwrap().seed, 99);
}

#[test]
fn invalid_config_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &FREE.replace("dt = 0.01", "dt = -0.01"));
    let out = edlab(&["evolve", "--config", bad.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "validation");
    assert!(err["message"].as_str().unwrap().contains("solver.dt"));

    let garbled = write_config(dir.path(), "garbled.toml", &FREE.replace("steps = 40", "steps = forty"));
    let out = edlab(&["evolve", "--config", garbled.to_str().unwrap()], &dir.path().join("out2"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "parse");

    let out = edlab(&["evolve", "--config", "/nonexistent/edlab.toml"], &dir.path().join("out3"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "io");

    let out = edlab(&["evolve"], &dir.path().join("out4"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_checkpoint_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let first = write_config(dir.path(), "first.toml", FREE);
    assert_eq!(edlab(&["evolve", "--config", first.to_str().unwrap()], &dir.path().join("a")).status.code(), Some(0));
    let path = dir.path().join("a/checkpoints/step_00000020.edwf");
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&path, &bytes).unwrap();
    let restart = FREE.replace(
        "kind = \"gaussian\"\ncenters = [[0.0]]\nwidths = 1.0\nwavevectors = [0.5]",
        "kind = \"checkpoint\"\npath = \"a/checkpoints/step_00000020.edwf\"",
    );
    let second = write_config(dir.path(), "second.toml", &restart);
    let out = edlab(&["evolve", "--config", second.to_str().unwrap()], &dir.path().join("b"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "checksum-mismatch");
}

#[test]
fn leaking_packet_exits_with_numerical_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "leak.toml", &FREE.replace("centers = [[0.0]]", "centers = [[12.0]]"));
    let out = edlab(&["evolve", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["kind"], "numerical");
}

#[test]
fn enforced_failing_check_exits_with_check_status() {
    // a free vortex spreads, so its inertia grows away from the matched rate
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("vortex_rotation.toml")).unwrap();
    let free = text.replace("[potential]\nfamily = \"external-harmonic\"\nomega = 0.8660254037844386\n", "");
    assert_ne!(free, text);
    let cfg = write_config(dir.path(), "free_vortex.toml", &free);
    let out = edlab(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["kind"], "check-failed");
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failed_checks"][0], "angular-constraint");
}
