use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn hamlet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamlet"))
        .current_dir(dir)
        .env_remove("HAMLET_OUT")
        .env_remove("HAMLET_STATE")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hamlet(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

/// The `algorithm` column of a report.
fn labels(csv: &Path) -> BTreeSet<String> {
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "algorithm").unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().to_string()).collect()
}

#[test]
fn state_survives_between_invocations() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["init", "--deterministic"]);
    let alg = write(d, "ridge.json", r#"{"kind": "algorithm", "name": "Ridge", "params": {"alpha": "0.5"}, "label": "R05"}"#);
    ok(d, &["add-alg", &alg, "--deterministic"]);
    let data = write(d, "diab.json", r#"{"kind": "data", "name": "diabetes", "params": {"type": "test"}}"#);
    ok(d, &["add-data", &data, "--deterministic"]);
    let train = write(
        d,
        "train.json",
        r#"{"id": "t", "lambda": [{"name": "Ridge", "params": {"alpha": "0.5"}}],
            "delta": [{"name": "diabetes", "params": {"type": "train"}}],
            "output": {"type": "train", "measures": ["mse"]}}"#,
    );
    ok(d, &["query", &train, "--deterministic"]);
    assert!(d.join("out/t/report.csv").exists());

    let test = write(
        d,
        "test.json",
        r#"{"id": "x", "lambda": [{"name": "*"}], "delta": [{"name": "*", "params": {"type": "test"}}],
            "output": {"format": "plot", "measures": ["mse"]}}"#,
    );
    ok(d, &["query", &test, "--deterministic", "--trace", "trace.jsonl"]);
    assert_eq!(labels(&d.join("out/x/report.csv")), BTreeSet::from(["R05".to_string()]));
    assert!(d.join("out/x/plots/diabetes_mse.svg").exists());
    let trace = fs::read_to_string(d.join("trace.jsonl")).unwrap();
    assert!(trace.lines().count() > 2);
    assert!(trace.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));

    let dot = ok(d, &["export", "dot", "--no-models", "--deterministic"]);
    assert!(dot.contains("\"SYS\" -> \"ALG\""));
    assert!(!dot.contains("ellipse"));
    assert!(ok(d, &["export", "dot", "--deterministic"]).contains("ellipse"));
    let json: serde_json::Value = serde_json::from_str(&ok(d, &["export", "json", "--deterministic"])).unwrap();
    // SYS, ALG, DATA, the Ridge leaf, one model, and two diabetes leaves
    // under a composite
    assert_eq!(json.as_array().unwrap().len(), 8);
}

#[test]
fn malformed_queries_exit_3_with_a_path() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let bad = write(d, "bad.json", r#"{"id": "b", "lambda": [{"name": "SVC", "params": {"kernal": "rbf"}}], "delta": [{"name": "iris"}], "output": {"measures": ["accuracy"]}}"#);
    let out = hamlet(d, &["query", &bad]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("$.lambda[0].params.kernal"));
    let broken = write(d, "broken.json", "{\"id\": ");
    assert_eq!(hamlet(d, &["query", &broken]).status.code(), Some(3));
}

#[test]
fn scenario_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let construction = scenarios().join("construction.scenario");
    ok(d, &["run", construction.to_str().unwrap()]);

    let failing = write(d, "fail.scenario", r#"{"steps": [{"step": "assert", "assert": "count", "kind": "model", "equals": 1}]}"#);
    let out = hamlet(d, &["run", &failing]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 0"));

    let unknown = write(d, "unknown.scenario", r#"{"steps": [{"step": "fly"}]}"#);
    assert_eq!(hamlet(d, &["run", &unknown]).status.code(), Some(2));
    assert_eq!(hamlet(d, &["run", "missing.scenario"]).status.code(), Some(2));
    assert_eq!(hamlet(d, &["init", "--alpha", "2"]).status.code(), Some(2));
}

#[test]
fn workload_reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let workload = scenarios().join("workload.scenario");
    ok(d, &["run", workload.to_str().unwrap(), "--out", "a"]);
    ok(d, &["run", workload.to_str().unwrap(), "--out", "b"]);
    let rbf = labels(&d.join("a/rbf/report.csv"));
    assert_eq!(rbf, ["A03", "A04", "A05", "A14", "A15"].into_iter().map(String::from).collect());
    assert!(d.join("a/all/matrix_accuracy.csv").exists());
    for entry in walk(&d.join("a")) {
        let rel = entry.strip_prefix(d.join("a")).unwrap();
        assert_eq!(fs::read(&entry).unwrap(), fs::read(d.join("b").join(rel)).unwrap(), "{}", rel.display());
    }
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
