use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::RunOutput;
use super::run::{error_bound, holdout_error};
use crate::error::Result;
use crate::hard_instances::scenario::make_scenario;

/// Largest accepted gap between a stored and a recomputed held-out error.
pub const RECOMPUTE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub seed: u64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks the soundness contract of a records file.
///
/// For every accepted record the scenario is rebuilt from the stored config
/// and seed, the held-out error of the stored hypothesis is recomputed and
/// compared with the stored value, and both are held to the error bound.
/// Biased-scenario accepts also get their positive mass recomputed.
pub fn verify_records(path: &Path) -> Result<VerifyReport> {
    verify_output(&RunOutput::read(path)?)
}

pub fn verify_output(out: &RunOutput) -> Result<VerifyReport> {
    let cfg = &out.config;
    let kind = cfg.scenario_kind()?;
    let bound = error_bound(cfg.learner.eps, cfg.samples.m_holdout);
    let mut violations = Vec::new();
    let mut flag = |seed, what: String| violations.push(Violation { seed, what });
    for r in &out.records {
        if r.violation() {
            flag(r.seed, "record is flagged as a contract violation".into());
        }
        if !r.accepted() {
            continue;
        }
        let Some(h) = &r.hypothesis else {
            flag(r.seed, "accepted without a hypothesis".into());
            continue;
        };
        let scenario = make_scenario(&kind, &cfg.truth_spec(), r.seed)?;
        if r.truth.as_ref() != Some(&scenario.truth) {
            flag(r.seed, "stored truth differs from the regenerated one".into());
        }
        let err = holdout_error(&scenario, h, cfg.samples.m_holdout, r.seed);
        match r.holdout_error {
            Some(stored) if (stored - err).abs() <= RECOMPUTE_TOL => {}
            Some(stored) => flag(r.seed, format!("stored held-out error {stored} but recomputed {err}")),
            None => flag(r.seed, "accepted without a held-out error".into()),
        }
        if err > bound {
            flag(r.seed, format!("held-out error {err} exceeds bound {bound}"));
        }
        if let Some(stored) = r.holdout_error.filter(|&s| s > bound) {
            flag(r.seed, format!("stored held-out error {stored} exceeds bound {bound}"));
        }
        let test = scenario.test_sample(cfg.samples.m_test, r.seed);
        let outcome = crate::tds::TdsOutcome {
            verdict: crate::tds::Verdict::Accept,
            hypothesis: Some(h.clone()),
            diagnostics: Default::default(),
        };
        if !scenario.check(&outcome, &test).contract_ok {
            flag(r.seed, "accepted hypothesis breaks the scenario dichotomy".into());
        }
    }
    Ok(VerifyReport { checked: out.records.len(), violations })
}
