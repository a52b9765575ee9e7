use std::time::Instant;

use rayon::prelude::*;

use super::config::RunConfig;
use super::record::{RunOutput, RunRecord, Summary};
use crate::error::Result;
use crate::hard_instances::scenario::{make_scenario, Scenario, ScenarioKind};
use crate::tds::{tds_learn, TdsParams, Verdict};

/// Allowed held-out error on an accept: `ε + 3·√(ε(1−ε)/m)`.
pub fn error_bound(eps: f64, m_holdout: usize) -> f64 {
    eps + 3.0 * (eps * (1.0 - eps) / m_holdout as f64).sqrt()
}

/// Runs every seed of `cfg` (in parallel) and collects records in seed order.
pub fn run_scenario(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let kind = cfg.scenario_kind()?;
    let params = cfg.tds_params();
    let records: Vec<RunRecord> = cfg.seeds.par_iter().map(|&seed| run_seed(cfg, &kind, &params, seed)).collect();
    let summary = Summary::from_records(&records);
    Ok(RunOutput { config: cfg.clone(), records, summary })
}

fn blank_record(cfg: &RunConfig, kind: &ScenarioKind, seed: u64) -> RunRecord {
    RunRecord {
        seed,
        scenario: kind.name().into(),
        verdict: None,
        reject_reason: None,
        error: None,
        hypothesis: None,
        truth: None,
        holdout_error: None,
        error_bound: error_bound(cfg.learner.eps, cfg.samples.m_holdout),
        soundness_ok: true,
        contract_ok: true,
        expectation_met: false,
        lambda_hat: None,
        diagnostics: None,
        wall_time_ms: 0,
    }
}

/// One seed end to end. Failures are recorded, never propagated.
pub fn run_seed(cfg: &RunConfig, kind: &ScenarioKind, params: &TdsParams, seed: u64) -> RunRecord {
    let start = Instant::now();
    let mut rec = blank_record(cfg, kind, seed);
    let scenario = match make_scenario(kind, &cfg.truth_spec(), seed) {
        Ok(s) => s,
        Err(e) => {
            rec.error = Some(format!("scenario: {e}"));
            rec.wall_time_ms = start.elapsed().as_millis() as u64;
            return rec;
        }
    };
    rec.truth = Some(scenario.truth.clone());
    let train = scenario.train(cfg.samples.m_train, seed);
    let test = scenario.test_sample(cfg.samples.m_test, seed);
    match tds_learn(&train, &test, params) {
        Ok(outcome) => {
            let check = scenario.check(&outcome, &test);
            rec.contract_ok = check.contract_ok;
            rec.expectation_met = check.expectation_met;
            rec.lambda_hat = check.lambda_hat;
            if let Verdict::Reject(reason) = &outcome.verdict {
                rec.reject_reason = Some(reason.name().into());
            }
            if outcome.accepted() {
                if let Some(h) = &outcome.hypothesis {
                    let err = holdout_error(&scenario, h, cfg.samples.m_holdout, seed);
                    rec.soundness_ok = err <= rec.error_bound;
                    rec.holdout_error = Some(err);
                }
            }
            rec.verdict = Some(outcome.verdict);
            rec.hypothesis = outcome.hypothesis;
            rec.diagnostics = Some(outcome.diagnostics);
        }
        Err(e) => rec.error = Some(format!("learner: {e}")),
    }
    rec.wall_time_ms = start.elapsed().as_millis() as u64;
    rec
}

/// Disagreement of `h` with the scenario truth on `m` fresh test draws.
pub fn holdout_error(
    scenario: &Scenario,
    h: &crate::concepts::HalfspaceIntersection,
    m: usize,
    seed: u64,
) -> f64 {
    h.disagreement(&scenario.truth, &scenario.holdout(m, seed))
}
