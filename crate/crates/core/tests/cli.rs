//! End-to-end runs of the command-line binary.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crowdflow")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--seed", "1", "--out", "s.jsonl"]);
    let out = run(dir.path(), &["infer", "--in", "s.jsonl", "--model", "nope.cfw", "--out", "i.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.cfw"));
}

#[test]
fn format_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfw"), b"not a model").unwrap();
    ok(dir.path(), &["synth", "--seed", "1", "--out", "s.jsonl"]);
    let out = run(dir.path(), &["infer", "--in", "s.jsonl", "--model", "bad.cfw", "--out", "i.jsonl"]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(dir.path().join("bad.jsonl"), "{\"frame\":0}\n").unwrap();
    let out = run(dir.path(), &["track", "--in", "bad.jsonl", "--out", "t.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1"), "error names the line");
}

#[test]
fn eval_of_ground_truth_is_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--seed", "3", "--out", "s.jsonl"]);
    ok(dir.path(), &["eval", "--pred", "s.jsonl", "--gt", "s.jsonl", "--report", "r.json"]);
    let r = report(&dir.path().join("r.json"));
    for key in ["purity", "rand_index", "nmi"] {
        assert_eq!(r["grouping"][key], 1.0, "{key}");
    }
    assert_eq!(r["tracking"]["switches"], 0);
    for level in ["collective", "group", "atomic"] {
        assert_eq!(r["activity"][level]["overall"], 1.0, "{level}");
    }
}

/// Every frame maps distinct detections to distinct tracks, and every
/// detection carries exactly one group.
fn assert_feasible(records: &[Value]) {
    let mut frame = None;
    let mut seen = BTreeSet::new();
    for r in records {
        let f = r["frame"].as_u64().unwrap();
        if frame != Some(f) {
            frame = Some(f);
            seen.clear();
        }
        let pred = &r["pred"];
        assert!(pred["group"].is_u64());
        assert!(seen.insert(pred["track"].as_u64().unwrap()), "two detections share a track at frame {f}");
    }
}

#[test]
fn lambda_keeps_assignments_feasible() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--seed", "5", "--out", "s.jsonl"]);
    ok(dir.path(), &["track", "--in", "s.jsonl", "--out", "small.jsonl", "--lambda", "0.001"]);
    ok(dir.path(), &["track", "--in", "s.jsonl", "--out", "unit.jsonl", "--lambda", "1.0"]);
    let (small, unit) = (lines(&dir.path().join("small.jsonl")), lines(&dir.path().join("unit.jsonl")));
    assert_feasible(&small);
    assert_feasible(&unit);
    // the group term decouples from the matching, so its weight does not move Ω
    let groups = |v: &[Value]| v.iter().map(|r| r["pred"]["group"].clone()).collect::<Vec<_>>();
    assert_eq!(groups(&small), groups(&unit));

    let out = run(dir.path(), &["track", "--in", "s.jsonl", "--out", "x.jsonl", "--lambda", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--seed", "7", "--out", "s.jsonl"]);
    ok(dir.path(), &["track", "--in", "s.jsonl", "--out", "t.jsonl"]);
    ok(dir.path(), &["eval", "--pred", "t.jsonl", "--report", "r.json"]);
    let got = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    let golden = std::fs::read_to_string(data("track_seed7_report.json")).unwrap();
    assert_eq!(got, golden);
}

#[test]
fn golden_report_schema() {
    let r = report(&data("track_seed7_report.json"));
    let keys: Vec<&str> = r.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["activity", "frames", "grouping", "tracking"]);
    assert!(r["frames"].is_u64());
    for k in ["switches", "gt_tracks"] {
        assert!(r["tracking"][k].is_u64());
    }
    assert!(r["tracking"]["ratio"].is_f64());
    for k in ["purity", "rand_index", "nmi"] {
        let v = r["grouping"][k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    for (level, n) in [("collective", 5), ("group", 4), ("atomic", 2)] {
        let m = &r["activity"][level];
        let conf = m["confusion"].as_array().unwrap();
        assert_eq!(conf.len(), n);
        assert!(conf.iter().all(|row| row.as_array().unwrap().len() == n));
        let total: u64 = conf.iter().flat_map(|row| row.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(total, m["count"].as_u64().unwrap());
        assert!(m["overall"].is_f64() && m["mean_class"].is_f64());
    }
}

#[test]
fn empty_stream_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.jsonl"), "").unwrap();
    ok(dir.path(), &["track", "--in", "e.jsonl", "--out", "t.jsonl"]);
    assert_eq!(std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap(), "");
    ok(dir.path(), &["eval", "--pred", "t.jsonl", "--report", "r.json"]);
    let r = report(&dir.path().join("r.json"));
    assert_eq!(r["frames"], 0);
    assert!(r["grouping"].is_null());
}

#[test]
fn train_then_infer_labels_every_detection() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--seed", "8", "--preset", "queuing", "--frames", "20", "--out", "q.jsonl"]);
    ok(dir.path(), &["synth", "--seed", "9", "--preset", "walking", "--frames", "20", "--out", "w.jsonl"]);
    ok(dir.path(), &["train", "--in", "q.jsonl", "w.jsonl", "--stride", "2", "--out-model", "m.cfw"]);
    ok(dir.path(), &["infer", "--in", "q.jsonl", "--model", "m.cfw", "--out", "i.jsonl", "--overlay", "o.jsonl"]);
    let inferred = lines(&dir.path().join("i.jsonl"));
    assert_eq!(inferred.len(), lines(&dir.path().join("q.jsonl")).len());
    assert!(inferred.iter().all(|r| r["pred"]["collective"].is_string()));
    let overlay = lines(&dir.path().join("o.jsonl"));
    assert_eq!(overlay.len(), inferred.len());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "lambda = -1.0\n").unwrap();
    ok(dir.path(), &["synth", "--seed", "2", "--out", "s.jsonl"]);
    let out = run(dir.path(), &["--config", "c.toml", "track", "--in", "s.jsonl", "--out", "t.jsonl"]);
    assert!(!out.status.success(), "invalid lambda from the file is used");
    ok(dir.path(), &["--config", "c.toml", "track", "--in", "s.jsonl", "--out", "t.jsonl", "--lambda", "1"]);
}
