use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pf-collapse");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn collapse_writes_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"collapse","noise":"gaussian","reps":400,"cells":[{"d":5,"n":20}]}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["collapse", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let reps = fs::read_to_string(out.join("reps.csv")).unwrap();
    let lines: Vec<&str> = reps.lines().collect();
    assert_eq!(lines[0], "experiment,kernel,d,n,rep,seed,w_max,ess,entropy,t_observed,s_min,z0");
    assert_eq!(lines.len(), 401);
    assert!(lines[1..].iter().all(|l| l.ends_with(',')), "z0 column empty for Gaussian rows");
    let hist = fs::read_to_string(out.join("histograms.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);
    for f in ["summary.csv", "manifest.json", "comparison.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn output_is_byte_stable_across_threads_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"collapse","noise":"cauchy-mv","seed":99,"cells":[{"d":6,"n":50,"reps":30},{"d":3,"n":10,"reps":7}]}"#,
    );
    let mut digests = Vec::new();
    for (i, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let o = run(&["collapse", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let files: Vec<Vec<u8>> = ["reps.csv", "summary.csv", "histograms.csv"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        digests.push(files);
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0], digests[2]);
}

#[test]
fn json_format_parses() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("j");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"collapse","noise":"cauchy-iid","cells":[{"d":4,"n":30,"reps":5}]}"#,
    );
    let o = run(&["collapse", "--config", &cfg, "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(v["cells"][0]["records"].as_array().unwrap().len(), 5);
    assert_eq!(v["histograms"][0]["counts"].as_array().unwrap().len(), 20);
}

#[test]
fn validation_errors_exit_one_and_list_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{"kind":"collapse","noise":"gaussian","reps":0,"speed":3,"cells":[{"d":0,"n":5}]}"#,
    );
    let o = run(&["collapse", "--config", &cfg, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    for needle in ["reps", "speed", "cells[0].d"] {
        assert!(err.contains(needle), "{needle} missing from: {err}");
    }
    assert_eq!(code(&run(&["collapse", "--preset", "fig9"])), 1);
}

#[test]
fn budget_skips_exit_three_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"collapse","noise":"gaussian","cells":[{"d":2,"n":10,"reps":3},{"d":2,"n":5000,"reps":3}]}"#,
    );
    let o = run(&["collapse", "--config", &cfg, "--budget", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let states: Vec<&str> = m["cells"].as_array().unwrap().iter().map(|c| c["state"].as_str().unwrap()).collect();
    assert_eq!(states, vec!["done", "skipped"]);
}

#[test]
fn manifest_verification_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("m");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"kind":"collapse","noise":"gaussian","cells":[{"d":3,"n":10,"reps":4}]}"#,
    );
    assert_eq!(code(&run(&["collapse", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let dir = out.to_str().unwrap();
    let listed = run(&["manifest", dir]);
    assert_eq!(code(&listed), 0);
    assert!(String::from_utf8_lossy(&listed.stdout).contains("reps.csv"));
    assert_eq!(code(&run(&["manifest", dir, "--verify"])), 0);

    let mut body = fs::read_to_string(out.join("summary.csv")).unwrap();
    body.push('\n');
    fs::write(out.join("summary.csv"), body).unwrap();
    let o = run(&["manifest", dir, "--verify"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("summary.csv"));
}

#[test]
fn consistency_and_theory_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = run(&["consistency", "--d", "2", "--n", "100,1000", "--reps", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("consistency_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let o = run(&["theory", "--n", "10000", "--d", "100", "--sigma-sq", "2", "--z0", "-0.5"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rate = v["gaussian_rate"].as_f64().unwrap();
    assert!((rate - (2.0 * 10000f64.ln() / 200.0).sqrt()).abs() < 1e-12);
    assert!(v["cauchy_given_z0"]["predicted_t"].is_number());

    assert_eq!(code(&run(&["theory", "--n", "1", "--d", "10"])), 1);
}

#[test]
fn check_subcommand_passes() {
    let o = run(&["check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(!text.contains("FAIL"));
}
