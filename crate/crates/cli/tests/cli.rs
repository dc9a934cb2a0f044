use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mtdiag_cli::config::PipelineConfig;
use serde_json::Value;

fn small_config(dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        work_dir: dir.to_path_buf(),
        ..Default::default()
    };
    cfg.synth.base.samples = 360;
    cfg.synth.vector_dimension = 6;
    cfg.architecture.filters_per_width = 4;
    cfg.architecture.max_len = 30;
    cfg.training.max_epochs = 1;
    cfg
}

fn write_config(dir: &Path, cfg: &PipelineConfig) -> String {
    fs::create_dir_all(dir).unwrap();
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_vec(cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn mtdiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtdiag"))
        .args(args)
        .args(["--log", "error"])
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn explain_before_train_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(dir.path()));
    let out = mtdiag(&["--config", &cfg, "explain"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("checkpoint missing; run train"), "{}", stderr(&out));

    let out = mtdiag(&["--config", &cfg, "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing; run synth"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(mtdiag(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mtdiag(&["sort", "--key", "margin"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"method": "saliency"}"#).unwrap();
    assert_eq!(mtdiag(&["--config", bad.to_str().unwrap(), "config"]).status.code(), Some(1));
    let mut cfg = small_config(dir.path());
    cfg.split.test_fraction = 0.9;
    let path = write_config(dir.path(), &cfg);
    assert_eq!(mtdiag(&["--config", &path, "synth"]).status.code(), Some(1));
    assert_eq!(mtdiag(&["--help"]).status.code(), Some(0));
}

#[test]
fn stages_chain_and_reject_foreign_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = write_config(dir.path(), &cfg);
    let out = mtdiag(&["--config", &path, "all"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("critical value = 10.828"));
    for f in [
        "manifest.jsonl",
        "train.jsonl",
        "valid.jsonl",
        "pattern.jsonl",
        "test.jsonl",
        "checkpoint.json",
        "train_log.jsonl",
        "predictions.jsonl",
        "patterns.json",
        "explanations.jsonl",
        "sorted.json",
        "stats.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    // sort emits a JSON id list; the key flags change the order
    let out = mtdiag(&["--config", &path, "sort", "--key", "logit", "--neuron", "human"]);
    assert!(out.status.success());
    let ids: Vec<u64> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ids.len(), 80);

    // switching the method tag reuses the checkpoint
    let out = mtdiag(&["--config", &path, "--method", "pattern-attribution", "explain"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = fs::read_to_string(dir.path().join("explanations.jsonl")).unwrap();
    let first: Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(first["method"], "pattern_attribution");

    // a different seed means the checkpoint no longer matches the config
    let out = mtdiag(&["--config", &path, "--seed", "999", "explain"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("config checksum mismatch"), "{}", stderr(&out));
}

#[test]
fn train_accepts_explicit_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = write_config(dir.path(), &cfg);
    assert!(mtdiag(&["--config", &path, "synth"]).status.success());
    assert!(mtdiag(&["--config", &path, "ingest"]).status.success());
    let out_ckpt = dir.path().join("elsewhere.json");
    let out = mtdiag(&[
        "--config",
        &path,
        "train",
        "--train",
        dir.path().join("train.jsonl").to_str().unwrap(),
        "--valid",
        dir.path().join("valid.jsonl").to_str().unwrap(),
        "--vectors",
        dir.path().join("vectors.vec").to_str().unwrap(),
        "--seed",
        "42",
        "--out-checkpoint",
        out_ckpt.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["best_validation_accuracy"].as_f64().is_some());
    assert!(out_ckpt.exists());
    let log = fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    let entry: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for k in ["epoch", "step", "loss", "validation_accuracy"] {
        assert!(entry.get(k).is_some(), "{k}");
    }
}

#[test]
fn mismatched_corpus_lengths_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [("s.txt", "a\nb\n"), ("h.txt", "a\nb\n"), ("m.txt", "a\n")] {
        fs::write(dir.path().join(name), body).unwrap();
    }
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let out = mtdiag(&[
        "--work-dir",
        &p("run"),
        "ingest",
        "--source",
        &p("s.txt"),
        "--human",
        &p("h.txt"),
        "--machine",
        &p("m.txt"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line-count mismatch 2/2/1"));
}
