//! Acceptance suite, part 3: CLI determinism and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mfgp")
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("mfgp-accept-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        TempDir(dir)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .env_remove("MFGP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Criterion 9: every command repeated with identical flags produces
/// byte-identical output files.
#[test]
fn criterion_9_cli_determinism() {
    let dir = TempDir::new("det");

    // train twice
    let model_a = dir.path("model_a.txt");
    let model_b = dir.path("model_b.txt");
    let metrics_a = dir.path("metrics_a.csv");
    let metrics_b = dir.path("metrics_b.csv");
    for (model, metrics) in [(&model_a, &metrics_a), (&model_b, &metrics_b)] {
        let out = run(&[
            "train",
            "--generator",
            "synthetic-a",
            "--seed",
            "7",
            "--spec",
            "SE[SE]",
            "--restarts",
            "3",
            "--out",
            model.to_str().unwrap(),
            "--metrics",
            metrics.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "train failed: {out:?}");
    }
    assert_eq!(read(&model_a), read(&model_b), "model artifacts differ");
    assert_eq!(read(&metrics_a), read(&metrics_b), "metrics differ");

    // predict twice from the same model
    let pred_a = dir.path("pred_a.csv");
    let pred_b = dir.path("pred_b.csv");
    for pred in [&pred_a, &pred_b] {
        let out = run(&[
            "predict",
            "--model",
            model_a.to_str().unwrap(),
            "--generator",
            "synthetic-a",
            "--seed",
            "7",
            "--grid",
            "0:1:200",
            "--truth",
            "--out",
            pred.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "predict failed: {out:?}");
    }
    assert_eq!(read(&pred_a), read(&pred_b), "predictions differ");
    let text = String::from_utf8(read(&pred_a)).unwrap();
    assert_eq!(text.lines().count(), 1 + 200 + 2, "rows + footer records");
    assert!(text.lines().last().unwrap().starts_with("# rmse = "));

    // sample twice
    let samp_a = dir.path("samp_a.csv");
    let samp_b = dir.path("samp_b.csv");
    for samp in [&samp_a, &samp_b] {
        let out = run(&[
            "sample",
            "--generator",
            "comp-identity",
            "--low-noise",
            "0",
            "--seed",
            "3",
            "--spec",
            "SE[SE]",
            "--grid",
            "0:1:50",
            "--n",
            "4",
            "--sample-seed",
            "11",
            "--restarts",
            "2",
            "--out",
            samp.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "sample failed: {out:?}");
    }
    assert_eq!(read(&samp_a), read(&samp_b), "samples differ");

    // benchmark twice at a small scale
    let bench_a = dir.path("bench_a.csv");
    let bench_b = dir.path("bench_b.csv");
    for bench in [&bench_a, &bench_b] {
        let out = run(&[
            "benchmark",
            "--scenarios",
            "synthetic-a",
            "--seeds",
            "2",
            "--restarts",
            "2",
            "--max-iters",
            "60",
            "--out",
            bench.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "benchmark failed: {out:?}");
    }
    assert_eq!(read(&bench_a), read(&bench_b), "benchmark tables differ");

    println!("ACCEPT 9 (CLI determinism across train/predict/sample/benchmark): PASS");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = TempDir::new("exit");

    // usage error: malformed composition spec
    let out = run(&[
        "train",
        "--generator",
        "synthetic-a",
        "--spec",
        "SE[",
        "--out",
        dir.path("x.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "bad spec should exit 2");

    // usage error: unknown flag combinations handled by clap
    let out = run(&["train", "--spec"]);
    assert_eq!(out.status.code(), Some(2), "clap usage error should exit 2");

    // runtime error: missing model file
    let out = run(&[
        "predict",
        "--model",
        dir.path("does-not-exist.txt").to_str().unwrap(),
        "--generator",
        "synthetic-a",
        "--grid",
        "0:1:10",
        "--out",
        dir.path("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "missing model should exit 1");

    // runtime error: dataset fingerprint mismatch
    let model = dir.path("model.txt");
    let out = run(&[
        "train",
        "--generator",
        "synthetic-a",
        "--seed",
        "1",
        "--spec",
        "SE[SE]",
        "--restarts",
        "2",
        "--max-iters",
        "60",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--generator",
        "synthetic-a",
        "--seed",
        "2",
        "--grid",
        "0:1:10",
        "--out",
        dir.path("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "fingerprint mismatch should exit 1");

    // usage error: empty scenario list
    let out = run(&[
        "benchmark",
        "--scenarios",
        "",
        "--out",
        dir.path("b.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "empty scenarios should exit 2");
}

#[test]
fn sample_with_zero_paths_writes_header_only() {
    let dir = TempDir::new("s0");
    let path = dir.path("samples.csv");
    let out = run(&[
        "sample",
        "--generator",
        "comp-identity",
        "--seed",
        "1",
        "--spec",
        "SE[SE]",
        "--grid",
        "0:1:5",
        "--n",
        "0",
        "--restarts",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(read(&path)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x");
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn out_dir_env_var_prefixes_relative_paths() {
    let dir = TempDir::new("env");
    let out = Command::new(bin())
        .args([
            "train",
            "--generator",
            "synthetic-a",
            "--seed",
            "1",
            "--spec",
            "SE[SE]",
            "--restarts",
            "2",
            "--max-iters",
            "60",
            "--out",
            "model-env.txt",
        ])
        .env("MFGP_OUT_DIR", dir.0.as_os_str())
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(dir.path("model-env.txt").exists());
}

#[test]
fn csv_dataset_and_query_round_trip() {
    let dir = TempDir::new("csv");

    // dataset CSV: two fidelity levels in one dimension
    let data_csv = dir.path("data.csv");
    let mut text = String::from("x_1,y,fidelity_level\n");
    for i in 0..12 {
        let x = i as f64 / 11.0;
        text.push_str(&format!("{x},{},1\n", (4.0 * x).sin()));
    }
    for i in 0..6 {
        let x = 0.05 + i as f64 / 6.0;
        text.push_str(&format!("{x},{},2\n", (4.0 * x).sin() * 0.5 - 0.1));
    }
    std::fs::write(&data_csv, text).unwrap();

    let model = dir.path("model.txt");
    let out = run(&[
        "train",
        "--csv",
        data_csv.to_str().unwrap(),
        "--spec",
        "SE[SE]",
        "--restarts",
        "2",
        "--max-iters",
        "60",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "train from csv failed: {out:?}");

    // query CSV with a truth column
    let query_csv = dir.path("query.csv");
    std::fs::write(&query_csv, "x_1,y\n0.1,0.0\n0.5,0.2\n0.9,-0.4\n").unwrap();
    let pred_csv = dir.path("pred.csv");
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--csv",
        data_csv.to_str().unwrap(),
        "--query-csv",
        query_csv.to_str().unwrap(),
        "--out",
        pred_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "predict from csv failed: {out:?}");
    let text = String::from_utf8(read(&pred_csv)).unwrap();
    assert!(text.starts_with("x_1,mean,std,truth\n"));
    assert_eq!(text.lines().count(), 1 + 3 + 2, "rows plus mnll/rmse footer");
    assert!(text.contains("# mnll = "));
}
