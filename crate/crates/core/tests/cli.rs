use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn freqlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqlab")).args(args).output().expect("spawn freqlab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn solve_config(boundary: &str, extra: &str) -> String {
    format!(
        r#"{{"schema_version":1,"field":{{"arity":"anisotropic","kind":"random_smooth","seed":3}},
            "boundary":{boundary},"grid":{{"n_r":32,"n_theta":32}},"profile":{{"r_min":0.2,"r_max":0.8,"count":5}}{extra}}}"#
    )
}

const HARMONIC: &str = r#"{"kind":"harmonic","params":{"degree":2}}"#;

#[test]
fn modulus_command_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", r#"{"schema_version":1,"modulus":{"kind":"log_power","params":{"p":1.0}}}"#);
    let out = dir.path().join("out");
    let o = freqlab(&["modulus", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("modulus_report.json"));
    assert_eq!(report["classification"]["verdict"], "Osgood");
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "modulus");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_clock_seconds"].is_null());
}

#[test]
fn solve_command_outputs_and_refinement_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", &solve_config(HARMONIC, ""));
    let out = dir.path().join("out");
    let o = freqlab(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--refine", "--timing"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution.fqlgrid", "profile.csv", "profile.svg", "solve.json", "profile_delta.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let delta = std::fs::read_to_string(out.join("profile_delta.csv")).unwrap();
    assert!(delta.starts_with("r,N_coarse,N_fine,delta"));
    assert_eq!(delta.lines().count(), 6);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["resolutions"], serde_json::json!([[32, 32], [63, 64]]));
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let mut sorted = outputs.clone();
    sorted.sort();
    assert_eq!(outputs, sorted);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let run = |name: &str, text: &str, cmd: &str| {
        let cfg = write(dir.path(), name, text);
        code(&freqlab(&[cmd, "--config", cfg.to_str().unwrap(), "--out", o]))
    };
    // Usage and configuration errors.
    assert_eq!(code(&freqlab(&["nosuch"])), 2);
    assert_eq!(code(&freqlab(&["solve", "--out", o])), 2);
    assert_eq!(run("empty.json", "", "solve"), 2);
    assert_eq!(run("bad.json", "{not json", "solve"), 2);
    assert_eq!(run("unknown.json", &solve_config(HARMONIC, r#","bogus":1"#), "solve"), 2);
    assert_eq!(run("schema.json", &solve_config(HARMONIC, "").replace("\"schema_version\":1", "\"schema_version\":9"), "solve"), 2);
    assert_eq!(code(&freqlab(&["experiment", "--scenario", "nosuch", "--out", o])), 2);
    // Solver budget exhausted.
    assert_eq!(run("budget.json", &solve_config(HARMONIC, r#","solver":{"tolerance":1e-14,"max_iterations":1}"#), "solve"), 3);
    // Zero data: the frequency is undefined.
    assert_eq!(run("zero.json", &solve_config(r#"{"kind":"constant","params":{"value":0.0}}"#, ""), "solve"), 1);
    assert_eq!(run("ok.json", &solve_config(HARMONIC, ""), "solve"), 0);
}

#[test]
fn single_scenario_experiment_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = freqlab(&["experiment", "--scenario", "dichot3", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["dichot3_holder/report.json", "dichot3_holder/margins.csv", "summary.json", "manifest.json"] {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        assert!(x.is_ok(), "{f} missing");
        assert_eq!(x.unwrap(), y.unwrap(), "{f} differs");
    }
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["seed"], 11);
    assert!(manifest["wall_clock_seconds"].is_null());
}
