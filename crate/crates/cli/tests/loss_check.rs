mod support;

use std::fs;
use std::process::Command;
use support::{run, s};
use tempfile::tempdir;

#[test]
fn default_run_writes_vectors() {
    let dir = tempdir().unwrap();
    assert_eq!(run(&["loss-check", "--output", s(dir.path())]), 0);
    let vectors = fs::read_to_string(dir.path().join("loss/vectors.jsonl")).unwrap();
    assert_eq!(vectors.lines().count(), 16);
    let check: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("loss/check.json")).unwrap()).unwrap();
    assert!(check["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn fixed_seed_reproduces_the_file() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(run(&["loss-check", "--output", s(d.path()), "--seed", "7", "--gamma", "0.4"]), 0);
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("loss/vectors.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    let first: serde_json::Value = serde_json::from_str(
        std::str::from_utf8(&read(&a)).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    assert_eq!(first["params"]["gamma"], 0.4);
    assert_eq!(first["seed"], 7);
}

#[test]
fn corrupted_vector_fails_verification_by_name() {
    let dir = tempdir().unwrap();
    assert_eq!(run(&["loss-check", "--output", s(dir.path())]), 0);
    let path = dir.path().join("loss/vectors.jsonl");
    assert_eq!(run(&["loss-check", "--verify", s(&path)]), 0);

    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[5]).unwrap();
    v["focal"] = serde_json::json!(v["focal"].as_f64().unwrap() + 0.01);
    lines[5] = v.to_string();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, lines.join("\n")).unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_lumbarkit"))
        .args(["loss-check", "--verify", s(&bad)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("v0005"), "{err}");
    assert!(err.contains("focal"), "{err}");
}

#[test]
fn env_vars_override_defaults() {
    let dir = tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lumbarkit"))
        .args(["loss-check"])
        .env("LUMBARKIT_OUTPUT", dir.path())
        .env("LUMBARKIT_ALPHA_MIX", "0.25")
        .env("LUMBARKIT_COUNT", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("loss/vectors.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("\"alpha_mix\":0.25"));
}

#[test]
fn invalid_parameters_are_validation_failures() {
    let dir = tempdir().unwrap();
    assert_eq!(run(&["loss-check", "--output", s(dir.path()), "--gamma=-1"]), 1);
    assert_eq!(run(&["loss-check", "--verify", s(&dir.path().join("absent.jsonl"))]), 2);
}
