use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicombing-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn geodesic_writes_csv_and_prints_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.csv");
    let o = run(&[
        "geodesic", "--space", "lsp4", "--p", "inf", "--from", "P1:0,-1", "--to", "P3:-1,0", "--format", "csv", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let printed = String::from_utf8_lossy(&o.stdout);
    let len: f64 = printed
        .lines()
        .find_map(|l| l.strip_prefix("length "))
        .expect("length line")
        .trim()
        .parse()
        .unwrap();
    assert!((len - 2.0).abs() < 1e-9, "{len}");
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().count() >= 3, "{csv}");
    // Atomic write leaves no temporaries beside the artifact.
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("path.csv")]);
}

#[test]
fn distance_agrees_with_oracle_bracket() {
    let o = run(&["distance", "--space", "lsp4", "--p", "2", "--from", "P1:0,-1", "--to", "P3:-1,0", "--oracle-h", "0.0625"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let d = v["distance"].as_f64().unwrap();
    assert!((d - 2.0).abs() < 1e-9, "{v}");
}

#[test]
fn helly_gamma45_reports_counterexample() {
    let o = run(&["helly", "--patch", "gamma45", "--max-radius", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["counterexample"]["centers"].as_array().unwrap().len(), 3, "{v}");
}

#[test]
fn helly_certifies_named_family() {
    let o = run(&["helly", "--patch", "gamma45", "--max-radius", "1", "--centers", "P1:-1,0;P1:1,2;P2:1,0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["pairwiseIntersect"], true);
    assert_eq!(v["emptyIntersection"], true);
    assert_eq!(v["foundBySearch"], true);

    let o = run(&["helly", "--patch", "plane", "--max-radius", "1", "--centers", "P:-1,0;P:1,0;P:0,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn helly_plane_has_no_counterexample() {
    let o = run(&["helly", "--patch", "plane", "--max-radius", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn suite_run_passes_and_is_json() {
    let o = run(&["suite", "run", "--name", "lemma5sp-trajectories", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 7);
    assert!(!v["cases"].as_array().unwrap().is_empty());
}

#[test]
fn suite_list_names_every_criterion() {
    let o = run(&["suite", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| !l.trim().is_empty()).count(), 13);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["geodesic", "--space", "lsp4"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["suite", "run", "--name", "nope"]).status.code(), Some(2));
}

#[test]
fn unknown_family_is_named_in_diagnostic() {
    let o = run(&["space", "describe", "--space", "lsp9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lsp9"), "{}", stderr(&o));
}

#[test]
fn malformed_space_document_is_usage_error() {
    let o = run(&["space", "validate", "--space", "{\"charts\": ["]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.json");
    std::fs::write(&f, "not json").unwrap();
    let o = run(&["space", "validate", "--space", &format!("@{}", f.display())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn space_build_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lsp2.json");
    let o = run(&["space", "build", "--space", "lsp2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let arg = format!("@{}", out.display());
    let o = run(&["space", "validate", "--space", &arg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(Path::new(&out).exists());
}

#[test]
fn bicombing_check_threshold_sets_exit_code() {
    let ok = run(&["bicombing", "check", "--space", "lsp2", "--p", "2", "--samples", "50"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let bad = run(&["bicombing", "check", "--space", "plane", "--p", "2", "--handle", "nudged", "--axioms", "conical", "--samples", "50"]);
    assert_eq!(bad.status.code(), Some(1), "{}", stderr(&bad));
}

#[test]
fn thread_variable_must_be_positive() {
    let o = Command::new(env!("CARGO_BIN_EXE_bicombing-lab"))
        .args(["suite", "list"])
        .env("BICOMBING_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
