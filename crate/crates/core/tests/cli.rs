use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn scenred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenred")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = scenred(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stages_compose_to_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["pipeline", "--builtin", "example1", "--enumerate", "--delta", "7.2", "--out", s(&a)]);
    let problem = b.join("problem.json");
    ok(&["gen", "--builtin", "example1", "--enumerate", "--out", s(&b)]);
    ok(&["coords", "--problem", s(&problem), "--threads", "2", "--out", s(&b)]);
    ok(&["cluster", "--problem", s(&problem), "--delta", "7.2", "--out", s(&b)]);
    let clusters = b.join("clusters.json");
    ok(&["solve", "--problem", s(&problem), "--clusters", s(&clusters), "--out", s(&b)]);
    for name in [
        "problem.json",
        "coordinates.csv",
        "clusters.json",
        "representatives.csv",
        "solve_full.json",
        "solve_reduced.json",
        "consistency.json",
    ] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn sampling_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&["gen", "--builtin", "example1", "--sample", "50", "--seed", "4", "--out", s(&a)]);
    ok(&["gen", "--builtin", "example1", "--sample", "50", "--seed", "4", "--out", s(&b)]);
    ok(&["gen", "--builtin", "example1", "--sample", "50", "--seed", "5", "--out", s(&c)]);
    let read = |d: &Path| fs::read(d.join("problem.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn sweep_writes_one_directory_per_delta() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    ok(&["pipeline", "--builtin", "example1", "--enumerate", "--delta-sweep", "0,14.4,28.8", "--out", s(out)]);
    let sweep: serde_json::Value = serde_json::from_slice(&fs::read(out.join("sweep.json")).unwrap()).unwrap();
    let reps: Vec<u64> = sweep.as_array().unwrap().iter().map(|r| r["representatives"].as_u64().unwrap()).collect();
    assert_eq!(reps.len(), 3);
    assert!(reps.windows(2).all(|w| w[1] <= w[0]));
    let dirs = fs::read_dir(out).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 3);
}

#[test]
fn missing_problem_file_names_the_stage() {
    let out = scenred(&["coords", "--problem", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage: ingest") && err.contains("/nonexistent/problem.json"), "{err}");
}

#[test]
fn malformed_problem_reports_position() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, "{\"first_stage\": }").unwrap();
    let out = scenred(&["gen", "--problem", s(&p), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn bad_arguments_are_usage_errors() {
    assert_eq!(scenred(&["pipeline", "--builtin", "example1"]).status.code(), Some(2));
    assert_eq!(scenred(&["gen", "--builtin", "nope", "--enumerate"]).status.code(), Some(1));
}
