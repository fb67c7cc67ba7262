mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    train: PathBuf,
    test: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let (train, test) = common::write_corpus(&root.join("corpus"), &common::CorpusShape::tiny());
        fs::write(
            root.join("run.json"),
            r#"{"random_embeddings": 5, "embedding_dim": 12, "filters": 8, "epochs": 6, "batch_size": 8,
                "horizon": 10, "min_len": 20, "seed": 3}"#,
        )
        .unwrap();
        Fixture { _dir: dir, root, train, test }
    }

    fn out(&self) -> PathBuf {
        self.root.join("out")
    }

    fn run(&self, cmd: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            cmd.to_string(),
            "--config".into(),
            self.root.join("run.json").display().to_string(),
            "--train-dir".into(),
            self.train.display().to_string(),
            "--test-dir".into(),
            self.test.display().to_string(),
            "--output-dir".into(),
            self.out().display().to_string(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        Command::new(env!("CARGO_BIN_EXE_lrptext")).args(&args).output().unwrap()
    }

    fn ok(&self, cmd: &str, extra: &[&str]) -> Output {
        let out = self.run(cmd, extra);
        assert!(out.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn first_test_id(&self) -> String {
        self.ok("preprocess", &["--split", "test"]);
        let text = fs::read_to_string(self.out().join("test.jsonl")).unwrap();
        let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        first["id"].as_str().unwrap().to_string()
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_corpus_path_is_reported() {
    let fx = Fixture::new();
    let out = Command::new(env!("CARGO_BIN_EXE_lrptext"))
        .args(["train", "--random-embeddings", "1", "--train-dir", "/nonexistent/train-xyz", "--test-dir"])
        .arg(&fx.test)
        .arg("--output-dir")
        .arg(fx.out())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/train-xyz"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let fx = Fixture::new();
    fs::write(fx.root.join("run.json"), r#"{"epoch": 3}"#).unwrap();
    let out = fx.run("train", &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn preprocess_writes_jsonl() {
    let fx = Fixture::new();
    fx.ok("preprocess", &["--split", "train"]);
    let text = fs::read_to_string(fx.out().join("train.jsonl")).unwrap();
    let rows: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 4 * 12);
    for row in &rows {
        let tokens = row["tokens"].as_array().unwrap();
        assert!(!tokens.is_empty() && tokens.len() <= 400);
        assert!(row["id"].as_str().unwrap().starts_with(row["label"].as_str().unwrap()));
    }
}

#[test]
fn train_then_eval_agree_and_match_golden() {
    let fx = Fixture::new();
    fx.ok("train", &[]);
    let metrics = read_json(&fx.out().join("train_metrics.json"));
    fx.ok("eval", &[]);
    let eval = read_json(&fx.out().join("eval.json"));
    assert_eq!(metrics["test"]["accuracy"], eval["accuracy"]);
    assert_eq!(eval["documents"], 24);
    assert_eq!(eval["majority_baseline"], 0.25);
    // Captured from the first verified run of this fixture.
    assert_eq!(eval["accuracy"].as_f64().unwrap(), 8.0 / 24.0);
}

fn only_explain_file(fx: &Fixture, extension: &str) -> PathBuf {
    let found: Vec<PathBuf> = fs::read_dir(fx.out().join("explain"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == extension))
        .collect();
    assert_eq!(found.len(), 1, "{found:?}");
    found.into_iter().next().unwrap()
}

#[test]
fn explain_lrp_and_sa() {
    let fx = Fixture::new();
    fx.ok("train", &[]);
    let id = fx.first_test_id();

    fx.ok("explain", &["--doc", &id, "--method", "lrp"]);
    let lrp = read_json(&only_explain_file(&fx, "json"));
    assert_eq!(lrp["method"], "LRP");
    assert_eq!(lrp["target_is_predicted"], true);
    assert_eq!(lrp["target_class"], lrp["predicted_class"]);
    let f = lrp["f_value"].as_f64().unwrap();
    let total: f64 = lrp["word_relevances"].as_array().unwrap().iter().map(|w| w["r"].as_f64().unwrap()).sum();
    assert!((total - f).abs() <= 1e-6 * f.abs() + 1e-9);
    assert_eq!(lrp["conservation_ok"], true);
    let html = fs::read_to_string(only_explain_file(&fx, "html")).unwrap();
    assert!(html.contains("<span"));
    fs::remove_dir_all(fx.out().join("explain")).unwrap();

    fx.ok("explain", &["--doc", &id, "--method", "sa", "--target", "sci.space"]);
    let sa = read_json(&only_explain_file(&fx, "json"));
    assert_eq!(sa["target_class"], "sci.space");
    assert!(sa["word_relevances"].as_array().unwrap().iter().all(|w| w["r"].as_f64().unwrap() >= 0.0));
}

#[test]
fn explain_rejects_unknown_document_and_class() {
    let fx = Fixture::new();
    fx.ok("train", &[]);
    assert_eq!(fx.run("explain", &["--doc", "nope/0"]).status.code(), Some(1));
    let id = fx.first_test_id();
    assert_eq!(fx.run("explain", &["--doc", &id, "--target", "alt.atheism"]).status.code(), Some(1));
}

#[test]
fn delete_eval_outputs() {
    let fx = Fixture::new();
    fx.ok("train", &[]);
    fx.ok("delete-eval", &[]);
    let mut csvs = 0;
    for entry in fs::read_dir(fx.out()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !(name.starts_with("deletion_") && name.ends_with(".csv")) {
            continue;
        }
        csvs += 1;
        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 1 + 11, "{name}");
        let first: Vec<&str> = rows[1].split(',').collect();
        assert_eq!(first[0], "0");
        let expected = if name.starts_with("deletion_correct") { 1.0 } else { 0.0 };
        assert_eq!(first[1].parse::<f64>().unwrap(), expected, "{name}");
        if name.contains("random") {
            assert_eq!(rows[0], "k,accuracy,std");
        }
    }
    assert_eq!(csvs, 6);
    for pop in ["correct", "wrong"] {
        let svg = fs::read_to_string(fx.out().join(format!("deletion_{pop}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}

#[test]
fn docvec_rows_per_document_and_scheme() {
    let fx = Fixture::new();
    fx.ok("train", &[]);
    fx.ok("docvec", &[]);
    let text = fs::read_to_string(fx.out().join("docvec.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "id,group_label,pc1,pc2,scheme,method");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 24 * 6);
    let schemes: std::collections::BTreeSet<(&str, &str)> = rows.iter().map(|r| (r[4], r[5])).collect();
    assert_eq!(schemes.len(), 6);
    let silhouettes = fs::read_to_string(fx.out().join("docvec_silhouette.csv")).unwrap();
    assert_eq!(silhouettes.lines().count(), 1 + 6);
}

#[test]
fn rerun_from_saved_model_is_byte_identical() {
    let fx = Fixture::new();
    fx.ok("train", &[]);
    let model = fx.out().join("model.json");
    fx.ok("delete-eval", &[]);
    let first = fs::read(fx.out().join("deletion_correct_lrp_decreasing.csv")).unwrap();
    fs::remove_file(fx.out().join("deletion_correct_lrp_decreasing.csv")).unwrap();
    fx.ok("delete-eval", &["--model", model.to_str().unwrap()]);
    assert_eq!(first, fs::read(fx.out().join("deletion_correct_lrp_decreasing.csv")).unwrap());
}
