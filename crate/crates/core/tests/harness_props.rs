use std::path::PathBuf;

use tds_core::hard_instances::make_scenario;
use tds_core::harness::{run_scenario, verify_output, verify_records, RunConfig, RunOutput};

fn smoke() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.seeds = vec![0, 1, 2];
    cfg
}

fn without_timing(out: &RunOutput) -> Vec<String> {
    out.records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.wall_time_ms = 0;
            serde_json::to_string(&r).unwrap()
        })
        .collect()
}

#[test]
fn records_are_identical_apart_from_timing() {
    let cfg = smoke();
    let (a, b) = (run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    assert_eq!(without_timing(&a), without_timing(&b));
    assert_eq!(a.records.iter().map(|r| r.seed).collect::<Vec<_>>(), cfg.seeds);
}

#[test]
fn stored_errors_are_reproduced_from_seed_and_hypothesis() {
    let cfg = smoke();
    let out = run_scenario(&cfg).unwrap();
    let kind = cfg.scenario_kind().unwrap();
    let mut checked = 0;
    for r in out.records.iter().filter(|r| r.accepted()) {
        let scenario = make_scenario(&kind, &cfg.truth_spec(), r.seed).unwrap();
        let fresh = scenario.holdout(cfg.samples.m_holdout, r.seed);
        let err = r.hypothesis.as_ref().unwrap().disagreement(&scenario.truth, &fresh);
        assert!((err - r.holdout_error.unwrap()).abs() <= 1e-12);
        checked += 1;
    }
    assert!(checked > 0, "smoke config accepted nothing");
    assert!(verify_output(&out).unwrap().ok());
}

#[test]
fn written_records_read_back_and_verify() {
    let out = run_scenario(&smoke()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    out.write(&path).unwrap();
    assert!(path.with_extension("csv").exists());
    let back = RunOutput::read(&path).unwrap();
    assert_eq!(back, out);
    let report = verify_records(&path).unwrap();
    assert_eq!(report.checked, out.records.len());
    assert!(report.ok(), "{:?}", report.violations);
}

#[test]
fn tampered_error_is_caught() {
    let mut out = run_scenario(&smoke()).unwrap();
    let r = out.records.iter_mut().find(|r| r.accepted()).expect("an accepted record");
    r.holdout_error = Some(0.9);
    let report = verify_output(&out).unwrap();
    assert!(!report.ok());
}
