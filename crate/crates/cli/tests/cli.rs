#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lingomerge::{load_adapter, load_delta, save_adapter, save_delta, DeltaMap, Tensor};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lingomerge")).args(args).output().unwrap()
}

macro_rules! lm {
    ($($a:expr),* $(,)?) => { run(&[$(std::ffi::OsStr::new(&$a)),*]) };
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn adapters(dir: &TempDir, langs: &[&str]) -> Vec<PathBuf> {
    let mut r = common::rng(11);
    let shapes: Vec<(String, usize, usize)> =
        (0..2).map(|l| (format!("model.layers.{l}.self_attn.q_proj"), 8, 6)).collect();
    langs
        .iter()
        .map(|lang| {
            let p = dir.path().join(format!("{lang}.safetensors"));
            save_adapter(&common::random_adapter(&mut r, lang, 2, &shapes), &p).unwrap();
            p
        })
        .collect()
}

#[test]
fn merge_writes_a_delta() {
    let dir = tempfile::tempdir().unwrap();
    let ins = adapters(&dir, &["en", "de", "ja"]);
    let out = dir.path().join("merged.safetensors");
    let o = lm!("merge", "--config", fixture("dare_ties.json"), "--weights", "1,2,1", "--out", out, ins[0], ins[1], ins[2]);
    assert!(o.status.success(), "{}", stderr(&o));
    let merged = load_delta(&out).unwrap();
    assert_eq!(merged.layers().len(), 2);
    assert!(merged.label().starts_with("DARE-TIES"));
}

#[test]
fn merge_refactor_rank_writes_an_adapter() {
    let dir = tempfile::tempdir().unwrap();
    let ins = adapters(&dir, &["en", "fr"]);
    let out = dir.path().join("merged.safetensors");
    let o = lm!("merge", "--config", fixture("knots_ties.json"), "--refactor-rank", "3", "--out", out, ins[0], ins[1]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ad = load_adapter(&out).unwrap();
    assert_eq!(ad.rank(), 3);
}

#[test]
fn knots_with_one_input_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let ins = adapters(&dir, &["en"]);
    let out = dir.path().join("m.safetensors");
    let o = lm!("merge", "--config", fixture("knots_ties.json"), "--out", out, ins[0]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_PARAMETER]"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn bad_density_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ins = adapters(&dir, &["en", "de"]);
    let out = dir.path().join("m.safetensors");
    let o = lm!("merge", "--config", fixture("dare_ties.json"), "--density", "0", "--out", out, ins[0], ins[1]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn delta_then_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let ins = adapters(&dir, &["en", "de"]);
    let deltas: Vec<PathBuf> = ins
        .iter()
        .map(|p| {
            let out = p.with_extension("delta");
            let o = lm!("delta", "--out", out, p);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    let csv = dir.path().join("sim.csv");
    let o = lm!("similarity", "--csv", csv, deltas[0], deltas[1]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], ",en,de");
    assert!(lines[1].starts_with("en,1.000000,"));
    assert_eq!(stdout(&o), text);
}

#[test]
fn zero_delta_similarity_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let zero = Tensor::zeros("l", vec![2, 2]).unwrap();
    let one = Tensor::new("l", vec![2, 2], vec![1.0f32; 4]).unwrap();
    let paths: Vec<PathBuf> = [("z", zero), ("o", one)]
        .into_iter()
        .map(|(label, t)| {
            let p = dir.path().join(format!("{label}.st"));
            let d = DeltaMap::new(label, [("l".to_string(), t)].into()).unwrap();
            save_delta(&d, &p).unwrap();
            p
        })
        .collect();
    let o = lm!("similarity", "--csv", dir.path().join("s.csv"), paths[0], paths[1]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[E_UNDEFINED_SIMILARITY]"));
}

#[test]
fn cost_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("cost.json");
    let o = lm!("cost", "--scenario", fixture("sentiment_runs_measured.json"), "--json", json);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    for v in ["35.3% ↓", "73.7% ↓", "5.6% ↓", "$113.4", "3.4h"] {
        assert!(table.contains(v), "missing {v} in\n{table}");
    }
    assert!(!table.contains('*'));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(report["comparisons"].as_array().unwrap().len(), 2);

    let o = lm!("cost", "--scenario", fixture("predicted_scenario.json"), "--mode", "update");
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("Update/Add Language*"));
    assert!(!table.contains("Initial Setup"));
}

#[test]
fn metrics_tasks() {
    let o = lm!("metrics", "--task", "sentiment", "--in", fixture("sentiment.jsonl"));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metrics"]["macro_precision"], 0.8333);
    assert_eq!(v["metrics"]["macro_f1"], 0.7333);
    assert_eq!(v["metrics"]["accuracy"], 0.75);

    let o = lm!("metrics", "--task", "summarization", "--in", fixture("summarization.jsonl"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metrics"]["rouge1_f1"], 0.8);

    let o = lm!("metrics", "--task", "extraction", "--in", fixture("extraction.jsonl"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["metrics"]["hallucination_rate"], 0.5);
}

#[test]
fn inspect_lists_tensors() {
    let dir = tempfile::tempdir().unwrap();
    let ins = adapters(&dir, &["ko"]);
    let o = lm!("inspect", ins[0]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("label = ko"));
    assert!(text.contains("model.layers.0.self_attn.q_proj.lora_A  F32  [2, 6]"));
}

#[test]
fn usage_io_and_format_errors() {
    let o = lm!("merge", "--bogus");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_USAGE]"));

    let o = lm!("inspect", "/nonexistent/x.safetensors");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[E_IO]"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.safetensors");
    let mut bytes = 1_000_000u64.to_le_bytes().to_vec();
    bytes.extend_from_slice(b"{}      ");
    std::fs::write(&bad, bytes).unwrap();
    let o = lm!("inspect", bad);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_HEADER_LEN]"));
    assert_eq!(stderr(&o).lines().count(), 1);

    let o = lm!("--help");
    assert_eq!(o.status.code(), Some(0));
}
