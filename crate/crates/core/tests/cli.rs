use std::path::Path;
use std::process::{Command, Output};

fn fraclap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclap")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn passing_check_exits_zero_and_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = fraclap(&["verify", "getoor", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("getoor.csv")).unwrap();
    assert!(csv.starts_with("check_id,case,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("getoor.json")).unwrap()).unwrap();
    assert!(json["getoor"]["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strict.toml",
        "[params]\nalpha = [1.0]\ngamma0 = [0.0]\ngamma1 = [0.0]\n[thresholds]\nkernel_spread = 1.0\n",
    );
    let out = fraclap(&["verify", "kernel-bound", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[FAIL]"));
}

#[test]
fn config_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.toml", "[params]\nalpha = [1.0]\nbeta = [2.0]\n");
    assert_eq!(fraclap(&["verify", "getoor", "--config", &unknown]).status.code(), Some(2));
    let bad_gamma = write(dir.path(), "gamma.toml", "[params]\nalpha = [1.0]\ngamma0 = [0.0]\ngamma1 = [9.0]\n");
    assert_eq!(fraclap(&["verify", "kernel-bound", "--config", &bad_gamma]).status.code(), Some(2));
    assert_eq!(fraclap(&["verify", "no-such-check"]).status.code(), Some(2));
    assert_eq!(fraclap(&["solve-elliptic", "--alpha", "2.5"]).status.code(), Some(2));
    assert_eq!(fraclap(&["--format", "xml", "kernel"]).status.code(), Some(2));
    assert_eq!(fraclap(&[]).status.code(), Some(2));
}

#[test]
fn solvers_print_csv() {
    let out = fraclap(&["solve-elliptic", "--alpha", "1", "--grid", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x,u"));
    assert_eq!(text.lines().count(), 65);

    let out = fraclap(&["solve-parabolic", "--grid", "32", "--steps", "4", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5 * 32);
}
