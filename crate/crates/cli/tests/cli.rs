//! End-to-end runs of the binary: the full data pipeline, the experiment
//! commands, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn fmlp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmlp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(dir: &Path, name: &str, contents: &str) {
    std::fs::write(dir.join(name), contents).unwrap();
}

const DISTRIBUTION: &str = r#"{
  "K_max": 6,
  "s": 1.5,
  "noise_sd": 0.05,
  "target": { "kind": "linear", "w": [1.0, -0.5] },
  "seed": 0
}"#;

#[test]
fn pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "dist.json", DISTRIBUTION);

    let out = fmlp(
        &[
            "gen-data",
            "--config",
            "dist.json",
            "--out",
            "data",
            "--n",
            "120",
            "--p",
            "3",
            "--curve-points",
            "40",
        ],
        dir,
    );
    assert_success(&out);
    for file in ["coords.csv", "targets.csv", "distribution.json", "curves.csv"] {
        assert!(dir.join("data").join(file).exists(), "missing {file}");
    }

    let out = fmlp(
        &[
            "train",
            "--coords",
            "data/coords.csv",
            "--targets",
            "data/targets.csv",
            "--out",
            "fit",
            "--hidden-units",
            "2",
            "--alpha",
            "3.0",
        ],
        dir,
    );
    assert_success(&out);
    assert!(dir.join("fit/model.json").exists());
    assert!(dir.join("fit/train-report.json").exists());

    let out = fmlp(
        &[
            "predict",
            "--model",
            "fit/model.json",
            "--coords",
            "data/coords.csv",
            "--out",
            "pred",
            "--targets",
            "data/targets.csv",
        ],
        dir,
    );
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rmse"), "no rmse in: {stdout}");
    assert!(dir.join("pred/predictions.csv").exists());

    // Project the written curves back onto a basis.
    write(dir, "basis.json", r#"{ "family": "fourier", "p": 3 }"#);
    let out = fmlp(
        &[
            "project",
            "--config",
            "basis.json",
            "--curves",
            "data/curves.csv",
            "--out",
            "proj",
        ],
        dir,
    );
    assert_success(&out);
    assert!(dir.join("proj/coords.csv").exists());
    assert!(dir.join("proj/residuals.csv").exists());
}

#[test]
fn train_uses_schedule_when_no_width_given() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "dist.json", DISTRIBUTION);
    assert_success(&fmlp(
        &["gen-data", "--config", "dist.json", "--out", "data", "--n", "100", "--p", "2"],
        dir,
    ));
    let out = fmlp(
        &[
            "train",
            "--coords",
            "data/coords.csv",
            "--targets",
            "data/targets.csv",
            "--out",
            "fit",
        ],
        dir,
    );
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("schedule for n = 100: L = 5"), "stdout: {stdout}");

    // Giving only one of the pair is a configuration error.
    let out = fmlp(
        &[
            "train",
            "--coords",
            "data/coords.csv",
            "--targets",
            "data/targets.csv",
            "--out",
            "fit2",
            "--alpha",
            "2.0",
        ],
        dir,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn schedule_check_prints_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fmlp(&["check-schedule", "--out", "sched"], tmp.path());
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("growth diagnostic eventually decreasing: yes"), "stdout: {stdout}");
    assert!(tmp.path().join("sched/results.csv").exists());
    assert!(tmp.path().join("sched/run-meta.json").exists());
}

#[test]
fn experiment_commands_run_small_sweeps() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(
        dir,
        "approx.json",
        r#"{
  "kind": "approx-sweep",
  "distribution": { "K_max": 6, "s": 1.5, "noise_sd": 0.2, "target": { "kind": "sqnorm" } },
  "p_grid": [2],
  "l_grid": [2],
  "n_train": 120,
  "n_test": 40,
  "train": { "restarts": 2, "max_iters": 60 }
}"#,
    );
    let out = fmlp(&["exp-approx", "--config", "approx.json", "--out", "a"], dir);
    assert_success(&out);
    assert!(dir.join("a/results.csv").exists());

    write(
        dir,
        "consistency.json",
        r#"{
  "kind": "consistency-sweep",
  "seeds": [0],
  "distribution": { "K_max": 6, "s": 1.5, "noise_sd": 0.2, "target": { "kind": "linear", "w": [1.0] } },
  "p": 2,
  "n_grid": [100],
  "n_test": 500,
  "train": { "restarts": 2, "max_iters": 60 }
}"#,
    );
    let out = fmlp(
        &["exp-consistency", "--config", "consistency.json", "--out", "c"],
        dir,
    );
    assert_success(&out);
    assert!(dir.join("c/results.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("minimal risk"));
}

#[test]
fn bad_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(dir, "bad.json", r#"{ "kind": "approx-sweep", "noise_ds": 1 }"#);
    let out = fmlp(&["exp-approx", "--config", "bad.json"], dir);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise_ds"));

    // Missing file is an I/O problem: runtime failure.
    let out = fmlp(&["exp-approx", "--config", "absent.json"], dir);
    assert_eq!(out.status.code(), Some(2));
}
