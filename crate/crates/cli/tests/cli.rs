use std::path::Path;
use std::process::{Command, Output};

fn harness(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble-harness"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        "shifts = 1\nworkers_per_shift = 30\nstandbys_per_shift = 20\nweeks = 2\npolicy_schedule = \"rigid,ml\"\n",
    )
    .unwrap();
    path
}

#[test]
fn run_writes_artifacts_and_boundary_reads_them_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = small_config(dir.path());
    let o = harness(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("week 2 (ml)"), "{stdout}");
    for f in [
        "metrics.csv",
        "dataset_week1.csv",
        "estimator_training1.txt",
        "boundary_training1.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 14);

    let csv = dir.path().join("grid.csv");
    let o = harness(&[
        "boundary",
        "--checkpoint",
        out.join("estimator_training1.txt").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(grid.lines().count(), 1 + 7 * 30);
    assert_eq!(
        grid,
        std::fs::read_to_string(out.join("boundary_training1.csv")).unwrap()
    );
}

#[test]
fn identical_runs_give_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = harness(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--weeks",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        csvs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let o = harness(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--weeks",
        "1",
        "--set",
        "shifts=2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 7 * 2);
}

#[test]
fn bad_input_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "late_fractoin = 0.2\n").unwrap();
    let o = harness(&["run", "--config", bad.to_str().unwrap(), "--out", "x"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("late_fractoin"));

    let o = harness(&[
        "run",
        "--late-fraction",
        "1.5",
        "--out",
        dir.path().join("y").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = harness(&["boundary", "--checkpoint", "/nonexistent", "--out", "z.csv"]);
    assert!(!o.status.success());
}

#[test]
fn oracle_suites_pass() {
    for suite in ["resolution", "dataset", "selection", "learning"] {
        let o = harness(&["oracle-check", "--suite", suite]);
        assert!(
            o.status.success(),
            "{suite}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}
