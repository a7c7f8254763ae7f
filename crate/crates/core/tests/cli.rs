use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mfuse::cli::{sha256_file, Manifest, MANIFEST_FILE};

fn mfuse(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfuse"))
        .args(args)
        .current_dir(cwd)
        .env_remove("MFUSE_SEED")
        .output()
        .expect("binary runs")
}

fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = mfuse(cwd, args);
    assert!(
        out.status.success(),
        "mfuse {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(dir: &Path) -> Manifest {
    Manifest::load(&dir.join(MANIFEST_FILE)).unwrap()
}

/// A small synthetic corpus in `root/corpus`.
fn corpus(root: &Path) -> PathBuf {
    ok(root, &["synth", "--out", "corpus", "synth.n_train=64", "synth.n_val=16", "synth.n_test=32", "seed=2"]);
    root.join("corpus")
}

const TRAIN: &[&str] = &["data.dir=corpus", "model.profile=synth", "train.lr=0.001", "train.batch_size=16", "seed=2"];

fn train_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["train", "--out", out];
    v.extend_from_slice(TRAIN);
    v.extend_from_slice(extra);
    v
}

fn tree_hashes(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(tree_hashes(&p));
        } else {
            out.push((p.clone(), sha256_file(&p).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(mfuse(tmp.path(), &["fly", "--out", "x"]).status.code(), Some(2));
    assert_eq!(mfuse(tmp.path(), &["train"]).status.code(), Some(2));
    assert_eq!(mfuse(tmp.path(), &["train", "--out", "x", "train.lr"]).status.code(), Some(2));
    assert_eq!(mfuse(tmp.path(), &["train", "--out", "x", "no.such_key=1"]).status.code(), Some(2));
    assert_eq!(
        mfuse(tmp.path(), &["train", "--out", "x", "--config", "a", "--manifest", "b"]).status.code(),
        Some(2)
    );
    let help = mfuse(tmp.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("synth.multimodal_fraction") && text.contains("MFUSE_SEED"));
}

#[test]
fn manifest_rerun_reproduces_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    corpus(root);
    ok(root, &train_args("run1", &["train.epochs=2"]));
    let first = manifest(&root.join("run1"));
    assert!(first.complete);
    assert_eq!(first.verb, "train");
    assert!(Path::new(&first.config["data.dir"]).is_absolute());
    assert!(first.artifacts.contains_key("checkpoint.mfuse") && first.artifacts.contains_key("history.csv"));

    // the rerun runs from another directory to show paths were resolved
    let elsewhere = tempfile::tempdir().unwrap();
    let m = root.join("run1").join(MANIFEST_FILE);
    let out = root.join("run2");
    ok(elsewhere.path(), &["train", "--manifest", m.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(manifest(&out).artifacts, first.artifacts);
    assert_eq!(
        sha256_file(&root.join("run1/checkpoint.mfuse")).unwrap(),
        sha256_file(&root.join("run2/checkpoint.mfuse")).unwrap()
    );
}

#[test]
fn rerun_refuses_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = corpus(root);
    ok(root, &train_args("run1", &[]));
    let mut text = fs::read_to_string(data.join("val.jsonl")).unwrap();
    text.push('\n');
    fs::write(data.join("val.jsonl"), text).unwrap();
    let out = mfuse(root, &["train", "--manifest", "run1/manifest.json", "--out", "run2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed"));
}

#[test]
fn rerun_with_a_different_override_reports_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    corpus(root);
    ok(root, &train_args("run1", &[]));
    let out = mfuse(root, &["train", "--manifest", "run1/manifest.json", "--out", "run2", "train.seed=9"]);
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint.mfuse"));
}

#[test]
fn train_leaves_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = corpus(root);
    let before = tree_hashes(&data);
    ok(root, &train_args("run", &[]));
    assert_eq!(tree_hashes(&data), before);
}

#[test]
fn failed_run_keeps_an_incomplete_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    fs::create_dir(root.join("empty")).unwrap();
    let out = mfuse(root, &["train", "--out", "run", "data.dir=empty"]);
    assert_eq!(out.status.code(), Some(6));
    let m = manifest(&root.join("run"));
    assert!(!m.complete);
    assert!(m.error.unwrap().contains("vocab.txt"));
}

#[test]
fn eval_writes_metrics_and_rejects_foreign_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    corpus(root);
    ok(root, &train_args("run", &["model.variant=fcm"]));
    ok(
        root,
        &["eval", "--out", "ev", "data.dir=corpus", "model.profile=synth", "model.variant=fcm", "eval.checkpoint=run/checkpoint.mfuse"],
    );
    let metrics = fs::read_to_string(root.join("ev/metrics.csv")).unwrap();
    assert!(metrics.starts_with("model,inputs,f1_at_half,max_f1,best_threshold,auc,balanced_accuracy\nFCM,\"TT,IT,I\","));
    for f in ["scores.csv", "pr.csv", "roc.csv"] {
        assert!(root.join("ev").join(f).exists(), "{f}");
    }
    let scores = fs::read_to_string(root.join("ev/scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 33);

    let out = mfuse(
        root,
        &["eval", "--out", "ev2", "data.dir=corpus", "model.profile=synth", "model.variant=tkm", "eval.checkpoint=run/checkpoint.mfuse"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn report_adds_the_random_row() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["report", "--out", "rep", "report.random_n=10000"]);
    let table = fs::read_to_string(tmp.path().join("rep/results.csv")).unwrap();
    let row = table.lines().nth(1).unwrap();
    assert!(row.starts_with("Random,"), "{table}");
}

#[test]
fn seed_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_mfuse"));
        c.args(["synth", "--out", out, "synth.n_train=8", "synth.n_val=0", "synth.n_test=8"]).args(extra).current_dir(tmp.path());
        match env {
            Some(v) => c.env("MFUSE_SEED", v),
            None => c.env_remove("MFUSE_SEED"),
        };
        assert!(c.status().unwrap().success());
        manifest(&tmp.path().join(out)).seeds["synth.seed"]
    };
    assert_eq!(run(Some("41"), &[], "a"), 41);
    assert_eq!(run(Some("41"), &["seed=5"], "b"), 5);
    assert_eq!(run(None, &[], "c"), 0);
}

#[test]
fn gradcheck_lists_every_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["gradcheck", "--out", "gc", "gradcheck.draws=2", "gradcheck.per_tensor=2"]);
    let rows = fs::read_to_string(tmp.path().join("gc/gradcheck.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + mfuse::autodiff::PRIMITIVE_NAMES.len() + 4);
    assert!(rows.lines().skip(1).all(|l| l.ends_with(",PASS")));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS model     tkm"));
}
