use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qudit-link")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "seed = 3\nn_trajectories = 2000\n[sweep]\nm_values = [1, 2]\ndistances_km = [10, 40]\n";

#[test]
fn validate_defaults_and_explain() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate", "--explain"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("switch.eta_sw"));
    assert!(text.contains("[default:reference-hardware]"));
    for line in text.lines().filter(|l| l.contains(" = ")) {
        assert!(line.trim_end().ends_with(']'), "no provenance tag: {line}");
    }
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[switch]\neta_sw = 1.2\n");
    let out = run(&["validate", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("switch.eta_sw"));

    let limit = write(dir.path(), "limit.toml", "m = 7\n");
    assert_eq!(run(&["validate", "--config", &limit], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["validate", "--config", "nope.toml"], dir.path()).status.code(), Some(3));
}

#[test]
fn zero_heralds_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dark.toml", "n_trajectories = 50\nswitch.eta_sw = 0.0\nsweep.strategies = [\"qudit\"]\n");
    assert_eq!(run(&["run", "--config", &cfg, "--out", "o"], dir.path()).status.code(), Some(2));
}

#[test]
fn run_is_reproducible_and_overridable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    for out in ["a", "b"] {
        let o = run(&["run", "--config", &cfg, "--out", out, "--threads", "1"], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/trajectory.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 12);
    let side = fs::read_to_string(dir.path().join("a/trajectory.json")).unwrap();
    assert!(side.contains("\"revision\""));

    let o = run(&["run", "--config", &cfg, "--out", "c", "--seed", "4", "--trajectories", "1000"], dir.path());
    assert!(o.status.success());
    let c = fs::read_to_string(dir.path().join("c/trajectory.csv")).unwrap();
    let row = c.lines().nth(1).unwrap();
    assert!(row.ends_with(",1000,4,0,trajectory"), "{row}");
}

#[test]
fn oracle_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let o = run(&["oracle", "--config", &cfg, "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("o/oracle.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",oracle")));

    let o = run(&["compare", "--config", &cfg, "--out", "o"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("o/compare.csv")).unwrap().lines().count(), 13);
}

#[test]
fn oracle_rejects_large_m() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "big.toml", "m = 4\n");
    assert_eq!(run(&["oracle", "--config", &cfg, "--out", "o"], dir.path()).status.code(), Some(1));
}
