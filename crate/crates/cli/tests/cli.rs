use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn tds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tds")).args(args).output().expect("spawn tds")
}

fn smoke_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn lines(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn run_smoke(dir: &Path) -> PathBuf {
    let out = dir.join("records.jsonl");
    let o = tds(&["run", "--config", smoke_config().to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn run_writes_parseable_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_smoke(dir.path());
    let parsed = lines(&out);
    let records = parsed.iter().filter(|v| v.get("seed").is_some()).count();
    assert!(records >= 1);
    assert!(out.with_extension("csv").exists());
    let v = tds(&["verify", "--records", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn verify_flags_a_tampered_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_smoke(dir.path());
    let mut tampered = 0;
    let text: Vec<String> = lines(&out)
        .into_iter()
        .map(|mut v| {
            if tampered == 0 && v.get("holdout_error").is_some_and(|e| !e.is_null()) {
                v["holdout_error"] = Value::from(0.9);
                tampered += 1;
            }
            v.to_string()
        })
        .collect();
    assert_eq!(tampered, 1, "no accepted record to tamper with");
    std::fs::write(&out, text.join("\n") + "\n").unwrap();
    let v = tds(&["verify", "--records", out.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(1), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn gen_hard_lp_output_reverifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lp.json");
    let o = tds(&["gen-hard", "--kind", "lp-moment-match", "--eps", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let dist = &v["result"]["dist"];
    let support: Vec<f64> = serde_json::from_value(dist["support"].clone()).unwrap();
    let weights: Vec<f64> = serde_json::from_value(dist["weights"].clone()).unwrap();
    let degree = v["degree"].as_u64().unwrap() as i32;
    for i in 0..=degree {
        let got: f64 = support.iter().zip(&weights).map(|(x, w)| w * x.powi(i)).sum();
        let want: f64 = if i % 2 == 1 { 0.0 } else { (1..i).step_by(2).map(f64::from).product() };
        assert!((got - want).abs() <= 1e-8, "moment {i}: {got} vs {want}");
    }
    assert!(v["min_mu"].as_f64().unwrap() >= 0.9 - 1e-9);
}

#[test]
fn gen_hard_mass_relocated_writes_an_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("reloc.json");
    let o = tds(&["gen-hard", "--kind", "mass-relocated", "--eps", "0.01", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["instance"]["tail_mass"].as_f64().unwrap() >= 0.12);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(smoke_config()).unwrap().replace("seeds = [0, 1]", "seeds = []");
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("r.jsonl");
    let o = tds(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeds"));
    let o = tds(&["run", "--config", "/nonexistent.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
