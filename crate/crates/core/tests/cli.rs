//! Black-box checks of the command line binary: exit codes, artifact
//! layout, and stdout contracts.

use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fall-cascade")).args(args).output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fall-cascade"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = run(&["pipeline", "--out", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("Usage"), "no usage text in: {err}");
    assert!(err.contains("--config"), "missing flag not named in: {err}");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = run(&["pipeline", "--config", "cfg.json", "--out", "x", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("--frobnicate"));

    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");

    let out = run_in(dir.path(), &["synth", "--config", "absent.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));

    std::fs::write(&cfg, "not json").unwrap();
    let out = run_in(dir.path(), &["synth", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(&cfg, "{}").unwrap();
    let out = run_in(
        dir.path(),
        &["pipeline", "--config", "cfg.json", "--set", "train.m=0.6", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("m + n"), "{}", stderr_of(&out));

    let out = run_in(
        dir.path(),
        &["pipeline", "--config", "cfg.json", "--set", "train.lr", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("key=value"));
}

fn keypoint_csv(frames: usize) -> String {
    let mut head = vec![
        "camera_id".to_string(),
        "subject_id".to_string(),
        "trial_id".to_string(),
        "frame_id".to_string(),
        "activity_code".to_string(),
    ];
    for i in 1..=17 {
        head.push(format!("x{i}"));
        head.push(format!("y{i}"));
        head.push(format!("c{i}"));
    }
    let mut text = head.join(",") + "\n";
    for f in 0..frames {
        let mut row = vec!["0".into(), "1".into(), "1".into(), f.to_string(), "7".into()];
        for k in 0..17 {
            row.push(format!("{}", 300.0 + 20.0 * k as f64 + f as f64));
            row.push(format!("{}", 400.0 + 13.0 * k as f64));
            row.push("0.9".into());
        }
        text += &(row.join(",") + "\n");
    }
    text
}

#[test]
fn prep_writes_processed_features() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("raw.csv"), keypoint_csv(4)).unwrap();
    let out = run_in(dir.path(), &["prep", "--input", "raw.csv", "--out", "p"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let processed = std::fs::read_to_string(dir.path().join("p/processed.csv")).unwrap();
    assert_eq!(processed.lines().count(), 5);
    assert!(dir.path().join("p/resolved_config.json").exists());

    // Strict preprocessing can drop every frame.
    let out = run_in(
        dir.path(),
        &["prep", "--input", "raw.csv", "--set", "preprocess.c_min=0.95", "--out", "q"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let processed = std::fs::read_to_string(dir.path().join("q/processed.csv")).unwrap();
    assert_eq!(processed.lines().count(), 1, "only the header should remain");
}

#[test]
fn pipeline_eval_predict_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), "{}").unwrap();

    let out = run_in(
        dir.path(),
        &[
            "synth",
            "--config",
            "cfg.json",
            "--seed",
            "3",
            "--set",
            "input.synth.per_class_counts=[8,8,8,8,8,60,60,60,60,60,60]",
            "--out",
            "data",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let dataset = std::fs::read_to_string(dir.path().join("data/dataset.csv")).unwrap();
    assert_eq!(dataset.lines().count(), 401);

    let out = run_in(
        dir.path(),
        &[
            "pipeline",
            "--config",
            "cfg.json",
            "--fast",
            "--seed",
            "3",
            "--input",
            "data/dataset.csv",
            "--set",
            "cleaning.enabled=false",
            "--set",
            "train.batch_bfc=64",
            "--out",
            "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    for f in [
        "bfc.json",
        "mfec.json",
        "cascade.json",
        "qbin.csv",
        "bfc_log.csv",
        "mfec_log.csv",
        "binary_report.csv",
        "binary_report.json",
        "fall_report.csv",
        "fall_report.json",
        "resolved_config.json",
    ] {
        assert!(dir.path().join("run").join(f).exists(), "pipeline wrote no {f}");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/resolved_config.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["train"]["epochs_bfc"], 30);
    assert_eq!(resolved["train"]["epochs_mfec"], 60);
    assert_eq!(resolved["train"]["seed"], 3);
    assert_eq!(resolved["input"]["features"]["path"], "data/dataset.csv");

    let out = run_in(
        dir.path(),
        &["eval", "--model", "run", "--input", "data/dataset.csv", "--out", "ev"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(dir.path().join("ev/fall_report.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("macro F1"));

    let sample: String =
        dataset.lines().take(6).map(|l| format!("{l}\n")).collect();
    std::fs::write(dir.path().join("sample.csv"), sample).unwrap();
    let out = run_in(dir.path(), &["predict", "--model", "run", "--input", "sample.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5);
    for line in &lines {
        assert!(
            ["HF", "KF", "BF", "SF", "SDF", "no_fall"].contains(line),
            "unexpected class name {line:?}"
        );
    }
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["predict", "--model", "no-model", "--input", "x.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("cascade.json"));

    std::fs::write(dir.path().join("cfg.json"), "{}").unwrap();
    let out = run_in(
        dir.path(),
        &["train-bfc", "--config", "cfg.json", "--input", "absent.csv", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
}

#[test]
fn degenerate_training_data_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), "{}").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "synth",
            "--config",
            "cfg.json",
            "--set",
            "input.synth.per_class_counts=[2,2,2,2,2,40,40,40,40,40,40]",
            "--out",
            "data",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    // Keep only no-fall rows (activity codes 6..=11).
    let full = std::fs::read_to_string(dir.path().join("data/dataset.csv")).unwrap();
    let mut lines = full.lines();
    let mut no_falls: String = lines.next().unwrap().to_string() + "\n";
    for line in lines {
        let code: u8 = line.split(',').nth(4).unwrap().parse().unwrap();
        if code > 5 {
            no_falls += line;
            no_falls.push('\n');
        }
    }
    std::fs::write(dir.path().join("no_falls.csv"), no_falls).unwrap();

    let out = run_in(
        dir.path(),
        &[
            "train-bfc",
            "--config",
            "cfg.json",
            "--fast",
            "--input",
            "no_falls.csv",
            "--out",
            "o",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("training error"), "{}", stderr_of(&out));
}
