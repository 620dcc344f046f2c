use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bsmrmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsmrmr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("error JSON on stderr")
}

fn small_run(dir: &Path) -> PathBuf {
    let o = dir.join("o");
    let body = format!(
        "n_iter = 300\nn_burnin = 100\nseed = 7\nout = {o:?}\ntrain = {:?}\ntest = {:?}\ntruth = {:?}\n",
        o.join("train.csv"),
        o.join("test.csv"),
        o.join("truth.json")
    );
    write_config(dir, "run.toml", &body)
}

#[test]
fn fit_on_missing_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let cfg = write_config(dir.path(), "c.toml", &format!("train = {missing:?}\n"));
    let out = bsmrmr(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["message"].as_str().unwrap().contains("nowhere"), "{err}");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "seed = 1\nburnin = 5\n");
    let out = bsmrmr(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("burnin"));
}

#[test]
fn missing_config_file_exits_2() {
    let out = bsmrmr(&["fit", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["path"], "/nonexistent/run.toml");
}

#[test]
fn pipeline_is_deterministic_and_evaluate_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run(dir.path());
    let cfg = cfg.to_str().unwrap();
    let o = dir.path().join("o");
    for verb in ["simulate", "fit", "evaluate", "predict", "diagnose"] {
        let out = bsmrmr(&[verb, "--config", cfg]);
        assert!(out.status.success(), "{verb}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |f: &str| fs::read(o.join(f)).unwrap();
    let (chain, eval, pred, diag) = (
        read("chain_1/chain.bin"),
        read("evaluation.json"),
        read("predictions.csv"),
        read("diagnostics.json"),
    );
    for verb in ["simulate", "fit", "evaluate", "predict", "diagnose"] {
        assert!(bsmrmr(&[verb, "--config", cfg]).status.success());
    }
    assert_eq!(read("chain_1/chain.bin"), chain);
    assert_eq!(read("evaluation.json"), eval);
    assert_eq!(read("predictions.csv"), pred);
    assert_eq!(read("diagnostics.json"), diag);

    // 100 test rows × 6 responses
    let rows = String::from_utf8(pred).unwrap().lines().count();
    assert_eq!(rows, 1 + 100 * 6);
    let report: Value = serde_json::from_slice(&eval).unwrap();
    assert!(report["metrics"]["L(B)"].as_f64().unwrap().is_finite());

    let leftovers: Vec<_> = walk(&o)
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn chains_get_separate_directories_and_streams() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run(dir.path());
    let cfg = cfg.to_str().unwrap();
    assert!(bsmrmr(&["simulate", "--config", cfg]).status.success());
    let out = bsmrmr(&["fit", "--config", cfg, "--chains", "3", "--threads", "2"]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    let chains = summary["chains"].as_array().unwrap();
    assert_eq!(chains.len(), 3);
    assert_ne!(chains[0]["digest"], chains[1]["digest"]);
    assert!(dir.path().join("o/chain_3/chain.bin").exists());

    // thread count does not change results
    let again = bsmrmr(&["fit", "--config", cfg, "--chains", "3", "--threads", "1"]);
    let again: Value = serde_json::from_slice(&again.stdout).unwrap();
    for (a, b) in chains.iter().zip(again["chains"].as_array().unwrap()) {
        assert_eq!(a["digest"], b["digest"]);
    }
}

#[test]
fn sweep_emits_the_full_factorial() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("n_iter = 40\nn_burnin = 10\nseed = 2\ncv_folds = 2\nout = {o:?}\n"),
    );
    let out = bsmrmr(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(o.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 33);
    assert!(lines[1].starts_with("1,1,1,40,20,6,15,3,6,0.1,3,2,"));
    assert!(lines[32].starts_with("32,2,2,20,20,6,6,6,6,0.2,2,2,"));
}

#[test]
fn replicate_study_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("n_iter = 100\nn_burnin = 50\nseed = 4\nreplicates = 2\nout = {o:?}\n"),
    );
    let out = bsmrmr(&["replicate-study", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(o.join("table.csv")).unwrap();
    assert!(table.starts_with("method,scenario,pattern,L(B)"));
    assert_eq!(fs::read_to_string(o.join("replicates.csv")).unwrap().lines().count(), 3);
}
