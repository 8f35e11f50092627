use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autoopt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn optimize(out: &Path) -> Output {
    let spec = assets().join("specs/office.json");
    run(&[
        "optimize",
        "--scene",
        "office",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--population",
        "40",
        "--generations",
        "10",
    ])
}

#[test]
fn optimize_writes_candidates_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = optimize(&a);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("seed: 42"));
    assert!(stdout(&first).contains("optimization"));

    let doc: Value = serde_json::from_str(&fs::read_to_string(a.join("candidates.json")).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["seed"], 42);
    let cands = doc["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 4);
    for c in cands {
        assert!(c["layout"]["Email"].is_array());
    }
    let pareto: Value = serde_json::from_str(&fs::read_to_string(a.join("pareto.json")).unwrap()).unwrap();
    assert_eq!(pareto["metadata"]["population"], 40);
    assert!(fs::read_to_string(a.join("pareto.csv")).unwrap().starts_with("f1,"));

    assert!(optimize(&b).status.success());
    for f in ["pareto.json", "candidates.json", "pareto.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn malformed_or_invalid_spec_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let out = dir.path().join("out");
    let o = run(&["optimize", "--spec", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let mut spec: Value = serde_json::from_str(&fs::read_to_string(assets().join("specs/office.json")).unwrap()).unwrap();
    spec["candidate_count"] = Value::from(0);
    fs::write(&bad, spec.to_string()).unwrap();
    let o = run(&["optimize", "--spec", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["optimize", "--scene", "garage", "--spec", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn refdirs_rows_sum_to_one() {
    let o = run(&["refdirs", "3", "10", "--seed", "7"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("seed 7"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert_eq!(r.len(), 3);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }
    assert_eq!(stdout(&run(&["refdirs", "3", "10", "--seed", "7"])), text);

    let o = run(&["refdirs", "3", "6", "--method", "das-dennis"]);
    assert_eq!(stdout(&o).lines().count(), 7);
    assert!(!run(&["refdirs", "3", "5", "--method", "sobol"]).status.success());
}

#[test]
fn classify_reports_accuracy_and_confusion() {
    let corpus = assets().join("corpus/office_instructions.jsonl");
    let o = run(&["classify", corpus.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("accuracy: 24/24"), "{text}");
    assert!(text.contains("well-formed") && text.contains("ambiguous"));
}

#[test]
fn pipeline_writes_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let script = assets().join("scripts/office_session.txt");
    let args = [
        "pipeline",
        "--instructions",
        script.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--population",
        "40",
        "--generations",
        "10",
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t["scene_id"], "office");
    let events = t["events"].as_array().unwrap();
    assert_eq!(events[0]["event"], "instruction");
    assert!(events.iter().any(|e| e["event"] == "question"));

    let first = fs::read(&out).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(fs::read(&out).unwrap(), first);
}
