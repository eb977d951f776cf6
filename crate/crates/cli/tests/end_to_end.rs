//! Drives the compiled binary through the full workflow: synthesize a
//! dataset, split it, inject label noise, train, evaluate on the clean
//! test split, and assemble the report.

use std::path::Path;
use std::process::{Command, Output};

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evifuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_workflow_produces_a_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let train_clean = tmp.path().join("train_clean");
    let test = tmp.path().join("test");
    let train_noisy = tmp.path().join("train_noisy");
    let run = tmp.path().join("run");

    assert_success(
        &run_cli(&[
            "synth",
            "--out",
            path_str(&data),
            "--samples",
            "150",
            "--classes",
            "3",
            "--views",
            "5,4",
            "--latent",
            "3",
            "--separation",
            "2.5",
            "--noise",
            "0.3",
            "--seed",
            "3",
        ]),
        "synth",
    );

    assert_success(
        &run_cli(&[
            "split",
            "--data",
            path_str(&data),
            "--fraction",
            "0.2",
            "--seed",
            "1",
            "--train-out",
            path_str(&train_clean),
            "--test-out",
            path_str(&test),
        ]),
        "split",
    );

    assert_success(
        &run_cli(&[
            "corrupt",
            "--data",
            path_str(&train_clean),
            "--rate",
            "0.2",
            "--seed",
            "2",
            "--out",
            path_str(&train_noisy),
        ]),
        "corrupt",
    );
    let records = std::fs::read_to_string(train_noisy.join("records.csv")).unwrap();
    // 80% of 150 = 120 training instances, 20% of those corrupted.
    assert_eq!(records.lines().count(), 1 + 24);

    let config_path = tmp.path().join("config.toml");
    std::fs::write(
        &config_path,
        "mode = \"tmnr2\"\nwarmup_epochs = 3\nmax_epochs = 13\nbatch_size = 32\n\
         k_neighbors = 3\nhidden_dim = 16\nseed = 5\n",
    )
    .unwrap();
    assert_success(
        &run_cli(&[
            "train",
            "--data",
            path_str(&train_noisy),
            "--config",
            path_str(&config_path),
            "--out",
            path_str(&run),
        ]),
        "train",
    );
    for name in ["checkpoint.json", "model.json", "summary.json"] {
        assert!(run.join(name).is_file(), "missing {name}");
    }

    let eval_out = run_cli(&["eval", "--run", path_str(&run), "--data", path_str(&test)]);
    assert_success(&eval_out, "eval");
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("eval/metrics.json")).unwrap())
            .unwrap();
    let accuracy = metrics["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&accuracy));

    let report_out = run_cli(&["report", "--run", path_str(&run)]);
    assert_success(&report_out, "report");
    assert!(run.join("report.json").is_file());
    let table = String::from_utf8_lossy(&report_out.stdout);
    assert!(table.contains("accuracy"), "table was: {table}");
}

#[test]
fn bad_rate_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_success(
        &run_cli(&[
            "synth",
            "--out",
            path_str(&data),
            "--samples",
            "30",
            "--classes",
            "2",
            "--views",
            "3,3",
            "--latent",
            "2",
        ]),
        "synth",
    );
    let out = run_cli(&[
        "corrupt",
        "--data",
        path_str(&data),
        "--rate",
        "1.0",
        "--out",
        path_str(&tmp.path().join("noisy")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_directory_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(&[
        "train",
        "--data",
        path_str(&tmp.path().join("nope")),
        "--out",
        path_str(&tmp.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_success(
        &run_cli(&[
            "synth",
            "--out",
            path_str(&data),
            "--samples",
            "30",
            "--classes",
            "2",
            "--views",
            "3,3",
            "--latent",
            "2",
        ]),
        "synth",
    );
    let config_path = tmp.path().join("config.toml");
    std::fs::write(&config_path, "learning_rate = 0.1\n").unwrap();
    let out = run_cli(&[
        "train",
        "--data",
        path_str(&data),
        "--config",
        path_str(&config_path),
        "--out",
        path_str(&tmp.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("learning_rate"), "stderr was: {stderr}");
}

#[test]
fn report_without_summary_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(&["report", "--run", path_str(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
}
