use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.config.json"))
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_holonomy-fields"));
    cmd.args(args).env_remove("HF_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(name: &str) -> String {
    fixture(name).to_str().unwrap().to_owned()
}

#[test]
fn validate_reports_each_stage() {
    let o = run(&["validate", "--config", &config("triangle-r2")], &[]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for stage in ["graph", "bundle", "connection", "potential", "splitting"] {
        assert!(out.contains(&format!("ok    {stage}")), "{out}");
    }

    let o = run(&["validate", "--config", &config("bad-unitary")], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL  connection  ConnectionNotUnitary:e"));

    let o = run(&["validate", "--config", &config("bad-eq1")], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Eq1Violation:x"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let fig6 = config("fig6-trivial");
    let o = run(&["verify", "nosuch", "--config", &fig6, "--seed", "1", "--out", out], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nosuch"));
    let o = run(&["verify", "gauge", "--config", &fig6, "--out", out], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["sample", "walks", "--from", "w", "--config", &fig6, "--seed", "1", "--out", out], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify", "--config", &fig6, "--seed", "1", "--out", out], &[("HF_THREADS", "0")]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn field_samples_are_reproducible() {
    let draw = |seed: &str, threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let args = ["sample", "field", "--config", &config("five-r2"), "--seed", seed, "--samples", "300"];
        let o = run(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat(), &[("HF_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(dir.path().join("field.csv")).unwrap()
    };
    let a = draw("5", "1");
    assert_eq!(a.lines().count(), 1 + 300 * 5 * 2);
    assert_eq!(a, draw("5", "3"));
    assert_ne!(a, draw("6", "1"));
}

#[test]
fn walks_end_in_the_well() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "walks", "--from", "a", "--config", &config("p2"), "--seed", "3", "--samples", "50"];
    let o = run(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("walks.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["start"], "a");
        assert_eq!(v["vertices"].as_array().unwrap().last().unwrap(), "w");
    }
}

#[test]
fn loop_soup_counts_match_the_mass() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sample", "loops", "--config", &config("fig6-trivial"), "--seed", "4", "--samples", "4000"];
    let o = run(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("mean non-constant loop count")).unwrap();
    let nums: Vec<f64> = line.split([' ', ',']).filter_map(|w| w.parse().ok()).collect();
    let (mean, se) = (nums[0], nums[1]);
    let expected = 0.5 * 3f64.ln();
    assert!((mean - expected).abs() <= 4.0 * se, "{line}");
    let occ = fs::read_to_string(dir.path().join("occupation.csv")).unwrap();
    assert_eq!(occ.lines().count(), 1 + 4000);
    assert!(dir.path().join("loops.jsonl").exists());
    assert!(!dir.path().join("occupation-negative.csv").exists());
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "feynman-kac", "gauge", "--config", &config("fig6"), "--seed", "2", "--samples", "20000"];
    let o = run(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r["pass"] == true && r["runtime_s"].is_null()));
}

#[test]
fn verify_all_is_thread_independent() {
    let report = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let args = ["verify", "all", "--config", &config("five-r2"), "--seed", "9", "--samples", "20000"];
        let o = run(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat(), &[("HF_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 13);
        fs::read(dir.path().join("report.json")).unwrap()
    };
    assert_eq!(report("1"), report("4"));
}

#[test]
fn experiment_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["experiment", "--config", &config("triangle-r2"), "--seed", "1", "--samples", "2000"];
    let o = run(&[&args[..], &["--out", dir.path().to_str().unwrap()]].concat(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("experiment.json")).unwrap()).unwrap();
    assert!(!v[0]["rows"].as_array().unwrap().is_empty());
}
