use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circsketch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn score_of_two_by_three_example() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, "1,0,0\n0,0,0\n").unwrap();
    let out = run(&["score", "--input", s(&a)]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["error"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((v["score"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn planted_matrix_scores_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("p.rbm");
    let gen = run(&["gen", "planted", "--m", "4", "--n", "32", "--seed", "3", "--out", s(&a)]);
    assert_eq!(gen.status.code(), Some(0));
    for mode in ["exact", "greedy"] {
        let out = run(&["score", "--input", s(&a), "--mode", mode]);
        assert_eq!(out.status.code(), Some(0));
        assert!(stdout_json(&out)["normalized_error"].as_f64().unwrap() <= 1e-10);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["score", "--input", s(&missing)]).status.code(), Some(1));
    assert_eq!(run(&["score"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2,3\n4,5\n").unwrap();
    let out = run(&["score", "--input", s(&ragged)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let big = dir.path().join("big.rbm");
    run(&["gen", "gaussian", "--rows", "8", "--cols", "40", "--out", s(&big)]);
    let out = run(&["score", "--input", s(&big), "--budget", "1000"]);
    assert_eq!(out.status.code(), Some(2));

    let tail = dir.path().join("tail");
    let args = ["mc", "tail", "--m", "2", "--n", "6", "--delta", "0.2", "--trials", "5", "--out", s(&tail)];
    assert_eq!(run(&args).status.code(), Some(1));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(run(&forced).status.code(), Some(0));
}

#[test]
fn learn_stops_after_one_iteration_with_unit_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let x = dir.path().join("x.csv");
    run(&["gen", "planted", "--m", "2", "--n", "8", "--out", s(&a)]);
    run(&["gen", "gaussian", "--rows", "8", "--cols", "12", "--seed", "1", "--out", s(&x)]);
    let out_dir = dir.path().join("run");
    let out = run(&[
        "learn", "--A", s(&a), "--X", s(&x), "--lambda", "0.1", "--epsilon", "1", "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&out_dir.join("summary.json"));
    assert_eq!(summary["iterations"], 1);
    assert_eq!(summary["status"], "converged");
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn lambda_grid_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.rbm");
    let x = dir.path().join("x.rbm");
    run(&["gen", "subspace", "--n", "16", "--r", "2", "--p", "30", "--sigma", "0.05", "--out", s(&x)]);
    run(&["gen", "pca", "--data", s(&x), "--k", "2", "--out", s(&a)]);
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "learn", "--A", s(&a), "--X", s(&x), "--lambda-grid", "1,0.1", "--max-outer", "10", "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    let subdirs = fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(subdirs, 2);
}

#[test]
fn eval_skips_zero_columns() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.rbm");
    let x = dir.path().join("x.rbm");
    run(&["gen", "subspace", "--n", "16", "--r", "2", "--p", "30", "--sigma", "0.05", "--out", s(&x)]);
    run(&["gen", "pca", "--data", s(&x), "--k", "2", "--out", s(&a)]);
    let learn_dir = dir.path().join("run");
    let out = run(&["learn", "--A", s(&a), "--X", s(&x), "--lambda", "0.01", "--max-outer", "20", "--out", s(&learn_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let data = dir.path().join("test.csv");
    let mut rows = String::new();
    for i in 0..16 {
        rows.push_str(&format!("{},0,{}\n", i as f64 * 0.1, 1.0 - i as f64 * 0.05));
    }
    fs::write(&data, rows).unwrap();
    let eval_dir = dir.path().join("eval");
    let out = run(&[
        "eval", "--A", s(&a), "--factors", s(&learn_dir.join("factors.json")), "--data", s(&data), "--out", s(&eval_dir),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&eval_dir.join("summary.json"));
    assert_eq!(summary["summary"]["evaluated"], 2);
    assert_eq!(summary["summary"]["skipped_zero"], 1);
}

#[test]
fn gen_formats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let rbm = dir.path().join("g.rbm");
    run(&["gen", "gaussian", "--rows", "3", "--cols", "7", "--seed", "9", "--out", s(&csv)]);
    run(&["gen", "gaussian", "--rows", "3", "--cols", "7", "--seed", "9", "--out", s(&rbm)]);
    let from_csv = circsketch::dataio::load_matrix(&csv, None).unwrap();
    let from_rbm = circsketch::dataio::load_matrix(&rbm, None).unwrap();
    assert_eq!(from_csv, from_rbm);

    let train = dir.path().join("tr.csv");
    let test = dir.path().join("te.csv");
    let out = run(&[
        "gen", "split", "--data", s(&rbm), "--train", "4", "--train-out", s(&train), "--test-out", s(&test),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let tr = circsketch::dataio::load_matrix(&train, None).unwrap();
    let te = circsketch::dataio::load_matrix(&test, None).unwrap();
    assert_eq!(tr.shape(), (3, 4));
    assert_eq!(te.shape(), (3, 3));
}
