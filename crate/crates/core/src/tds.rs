//! The two end-to-end learners. Each either rejects the test sample or
//! returns an intersection of at most `k` halfspaces picked from a finite
//! cover.

use serde::{Deserialize, Serialize};

use crate::concepts::HalfspaceIntersection;
use crate::covers::{
    build_candidate_set, build_sphere_cover, build_threshold_grid, CandidateSet, Thresholds,
    CANDIDATE_BUDGET, COVER_BUDGET,
};
use crate::error::{degenerate, Result, TdsError};
use crate::gaussian::MultiIndex;
use crate::linalg::{Labeled, OrthonormalBasis, Samples};
use crate::retrieval::retrieve_subspace_pca;
use crate::testers::{
    band_test_general_scan, band_test_homogeneous_scan, discrepancy_test, moment_test,
    spectral_test, BandScanner, DeltaRule, MomentTestParams, TestVerdict, Witness,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Homogeneous,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterMode {
    /// Derive ε′, ε″, T, r, Δ from (ε, k, d) and the constants.
    Theory,
    /// Use desk-scale defaults, each individually overridable.
    Practical,
}

/// Explicit parameter values; any `None` falls back to the mode default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub r: Option<u32>,
    pub delta_moment: Option<f64>,
    pub t: Option<f64>,
    /// Spacing of the threshold grid. Defaults to ε′ in theory mode.
    pub grid_step: Option<f64>,
    pub delta_rule: Option<DeltaRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub cover: u128,
    pub candidates: u128,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { cover: COVER_BUDGET, candidates: CANDIDATE_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdsParams {
    pub eps: f64,
    /// Target failure probability. Informational: rates are measured, not
    /// amplified.
    pub delta: f64,
    pub k: usize,
    pub mode: Mode,
    /// Constant in ε′ = ε^{3/2}/(C k^{3/2}).
    pub c: f64,
    /// Constant in ε″ = ε⁶/(C′ k⁷).
    pub c_prime: f64,
    /// Multiplier in r = ⌈C″ ln(10k/ε)⌉.
    pub c_dprime: f64,
    pub parameter_mode: ParameterMode,
    pub overrides: Overrides,
    pub budgets: Budgets,
}

/// Practical-mode defaults.
pub mod practical {
    pub const EPS1: f64 = 0.001;
    pub const EPS2: f64 = 0.15;
    pub const R: u32 = 3;
    pub const T: f64 = 2.0;
    pub const GRID_STEP: f64 = 0.05;
}

impl TdsParams {
    pub fn practical(mode: Mode, eps: f64, k: usize) -> Self {
        Self {
            eps,
            delta: 0.1,
            k,
            mode,
            c: 1.0,
            c_prime: 1.0,
            c_dprime: 1.0,
            parameter_mode: ParameterMode::Practical,
            overrides: Overrides::default(),
            budgets: Budgets::default(),
        }
    }

    pub fn theory(mode: Mode, eps: f64, k: usize) -> Self {
        Self { parameter_mode: ParameterMode::Theory, ..Self::practical(mode, eps, k) }
    }

    /// Concrete parameter values for dimension `d`.
    pub fn resolve(&self, d: usize) -> Result<Resolved> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(degenerate(format!("ε = {} outside (0, 1)", self.eps)));
        }
        if self.k == 0 {
            return Err(degenerate("k must be at least 1"));
        }
        if self.c < 1.0 || self.c_prime < 1.0 || self.c_dprime < 1.0 {
            return Err(degenerate("theory constants must be ≥ 1"));
        }
        let (eps, k) = (self.eps, self.k as f64);
        let o = &self.overrides;
        let base = match self.parameter_mode {
            ParameterMode::Theory => {
                let eps1 = eps.powf(1.5) / (self.c * k.powf(1.5));
                let log_term = (10.0 * k / eps).ln();
                let r = (self.c_dprime * log_term).ceil().max(1.0) as u32;
                Resolved {
                    eps1,
                    eps2: eps.powi(6) / (self.c_prime * k.powi(7)),
                    r,
                    delta_moment: MomentTestParams::default_delta(d, r),
                    t: 3.0 * log_term.sqrt(),
                    grid_step: eps1,
                    delta_rule: DeltaRule::Strict,
                }
            }
            ParameterMode::Practical => Resolved {
                eps1: practical::EPS1,
                eps2: practical::EPS2,
                r: practical::R,
                delta_moment: MomentTestParams::default_delta(d, practical::R),
                t: practical::T,
                grid_step: practical::GRID_STEP,
                delta_rule: DeltaRule::SamplingAdjusted,
            },
        };
        let r = o.r.unwrap_or(base.r);
        let delta_moment = o.delta_moment.unwrap_or(if o.r.is_some() {
            MomentTestParams::default_delta(d, r)
        } else {
            base.delta_moment
        });
        let eps1 = o.eps1.unwrap_or(base.eps1);
        let grid_step = o.grid_step.unwrap_or(match self.parameter_mode {
            ParameterMode::Theory => eps1,
            ParameterMode::Practical => base.grid_step,
        });
        Ok(Resolved {
            eps1,
            eps2: o.eps2.unwrap_or(base.eps2),
            r,
            delta_moment,
            t: o.t.unwrap_or(base.t),
            grid_step,
            delta_rule: o.delta_rule.unwrap_or(base.delta_rule),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub eps1: f64,
    pub eps2: f64,
    pub r: u32,
    pub delta_moment: f64,
    pub t: f64,
    pub grid_step: f64,
    pub delta_rule: DeltaRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RejectReason {
    SpectralFail,
    BandFail { direction: Vec<f64>, theta: f64 },
    MomentFail { alpha: MultiIndex },
    EmptyCandidates,
    DiscrepancyFail { pair: (usize, usize) },
    /// Counts saturate at `u64::MAX` so records stay plain JSON numbers.
    BudgetExceeded { what: String, count: u64, cap: u64 },
}

impl RejectReason {
    /// Short stable name for histograms.
    pub fn name(&self) -> &'static str {
        match self {
            RejectReason::SpectralFail => "spectral-fail",
            RejectReason::BandFail { .. } => "band-fail",
            RejectReason::MomentFail { .. } => "moment-fail",
            RejectReason::EmptyCandidates => "empty-candidates",
            RejectReason::DiscrepancyFail { .. } => "discrepancy-fail",
            RejectReason::BudgetExceeded { .. } => "budget-exceeded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "kebab-case")]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub resolved: Option<Resolved>,
    pub retrieval_eigenvalues: Vec<f64>,
    pub n_positives: usize,
    /// Retrieval could not run; only the constant hypothesis was considered.
    pub retrieval_skipped: bool,
    pub cover_size: usize,
    pub grid_size: usize,
    pub moment: Option<TestVerdict>,
    pub spectral: Option<TestVerdict>,
    pub band_tests_run: usize,
    /// Band test with the largest statistic-to-threshold ratio.
    pub worst_band: Option<TestVerdict>,
    /// Saturates at `u64::MAX`.
    pub candidates_enumerated: u64,
    pub candidate_count: usize,
    pub discrepancy: Option<TestVerdict>,
    pub hypothesis_index: Option<usize>,
    pub hypothesis_train_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdsOutcome {
    pub verdict: Verdict,
    pub hypothesis: Option<HalfspaceIntersection>,
    pub diagnostics: Diagnostics,
}

impl TdsOutcome {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }

    fn reject(reason: RejectReason, diagnostics: Diagnostics) -> Self {
        Self { verdict: Verdict::Reject(reason), hypothesis: None, diagnostics }
    }
}

fn saturate(x: u128) -> u64 {
    u64::try_from(x).unwrap_or(u64::MAX)
}

/// Turns budget overruns into rejections; every other error propagates.
macro_rules! try_budget {
    ($expr:expr, $diag:expr) => {
        match $expr {
            Ok(v) => v,
            Err(TdsError::BudgetExceeded { what, count, cap }) => {
                let reason = RejectReason::BudgetExceeded { what, count: saturate(count), cap: saturate(cap) };
                return Ok(TdsOutcome::reject(reason, $diag));
            }
            Err(e) => return Err(e),
        }
    };
}

fn check_inputs(train: &Labeled, test: &Samples, p: &TdsParams, mode: Mode) -> Result<()> {
    if p.mode != mode {
        return Err(degenerate(format!("learner called with mode {:?}", p.mode)));
    }
    if train.is_empty() {
        return Err(TdsError::InsufficientData("empty training set".into()));
    }
    if train.x.dim() != test.dim() {
        return Err(degenerate("training and test dimensions differ"));
    }
    Ok(())
}

/// Retrieved basis, or `None` when there are too few positives to run PCA.
fn retrieve(train: &Labeled, k: usize, diag: &mut Diagnostics) -> Result<Option<OrthonormalBasis>> {
    match retrieve_subspace_pca(train, k) {
        Ok(r) => {
            diag.retrieval_eigenvalues = r.eigenvalues;
            diag.n_positives = r.n_positives;
            Ok(Some(r.basis))
        }
        Err(TdsError::InsufficientData(_)) => {
            diag.retrieval_skipped = true;
            diag.n_positives = train.y.iter().filter(|&&y| y > 0).count();
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn ratio(v: &TestVerdict) -> f64 {
    if v.threshold > 0.0 {
        v.statistic / v.threshold
    } else if v.statistic > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn band_reason(v: &TestVerdict) -> RejectReason {
    match &v.witness {
        Some(Witness::Band { direction, theta }) => {
            RejectReason::BandFail { direction: direction.clone(), theta: *theta }
        }
        _ => RejectReason::BandFail { direction: Vec::new(), theta: 0.0 },
    }
}

/// Candidate set holding only the constant `+1` hypothesis, if its training
/// error qualifies.
fn constant_candidates(train: &Labeled, err_thresh: f64) -> Result<CandidateSet> {
    let neg = train.y.iter().filter(|&&y| y < 0).count() as f64 / train.len() as f64;
    if neg > err_thresh {
        return Err(TdsError::EmptyCandidateSet);
    }
    let mut f = CandidateSet::from_members(vec![HalfspaceIntersection::everything(train.x.dim())]);
    f.train_errors = vec![neg];
    f.train_err_threshold = err_thresh;
    Ok(f)
}

fn finish(
    f: Result<CandidateSet>,
    test: &Samples,
    eps: f64,
    mut diag: Diagnostics,
) -> Result<TdsOutcome> {
    let f = match f {
        Err(TdsError::EmptyCandidateSet) => {
            return Ok(TdsOutcome::reject(RejectReason::EmptyCandidates, diag))
        }
        other => try_budget!(other, diag),
    };
    diag.candidates_enumerated = saturate(f.enumerated);
    diag.candidate_count = f.len();
    let disc = try_budget!(discrepancy_test(&f, test, eps), diag);
    diag.discrepancy = Some(disc.clone());
    if !disc.accepted {
        let pair = match disc.witness {
            Some(Witness::Pair(a, b)) => (a, b),
            _ => (0, 0),
        };
        return Ok(TdsOutcome::reject(RejectReason::DiscrepancyFail { pair }, diag));
    }
    let best = f.best_index().expect("nonempty candidate set");
    diag.hypothesis_index = Some(best);
    diag.hypothesis_train_error = Some(f.train_errors[best]);
    Ok(TdsOutcome {
        verdict: Verdict::Accept,
        hypothesis: Some(f.members[best].clone()),
        diagnostics: diag,
    })
}

/// Learner for intersections of homogeneous halfspaces: retrieve, cover,
/// test the spectrum and bands of the test sample, then keep the candidates
/// that fit the training data and check that they agree on the test sample.
pub fn tds_learn_homogeneous(train: &Labeled, test: &Samples, p: &TdsParams) -> Result<TdsOutcome> {
    check_inputs(train, test, p, Mode::Homogeneous)?;
    let res = p.resolve(test.dim())?;
    let mut diag = Diagnostics { resolved: Some(res), ..Diagnostics::default() };
    let err_thresh = p.eps / 5.0;

    let basis = retrieve(train, p.k, &mut diag)?;
    let cover = match &basis {
        Some(b) => Some(try_budget!(build_sphere_cover(b, res.eps2, p.budgets.cover), diag)),
        None => None,
    };
    diag.cover_size = cover.as_ref().map_or(0, |c| c.len());

    let spectral = spectral_test(test)?;
    diag.spectral = Some(spectral.clone());
    if !spectral.accepted {
        return Ok(TdsOutcome::reject(RejectReason::SpectralFail, diag));
    }

    if let Some(cover) = &cover {
        for u in &cover.points {
            let v = band_test_homogeneous_scan(&BandScanner::new(test, u), res.eps1);
            diag.band_tests_run += 1;
            let worse = diag.worst_band.as_ref().is_none_or(|w| ratio(&v) > ratio(w));
            if !v.accepted {
                let reason = band_reason(&v);
                diag.worst_band = Some(v);
                return Ok(TdsOutcome::reject(reason, diag));
            }
            if worse {
                diag.worst_band = Some(v);
            }
        }
    }

    let f = match &cover {
        Some(c) => build_candidate_set(
            c,
            Thresholds::Homogeneous,
            p.k,
            train,
            err_thresh,
            p.budgets.candidates,
        ),
        None => constant_candidates(train, err_thresh),
    };
    finish(f, test, p.eps, diag)
}

/// Learner for intersections of general halfspaces: a low-degree moment test
/// on the test sample first, then the homogeneous pipeline over the product
/// of the sphere cover with a threshold grid.
pub fn tds_learn_general(train: &Labeled, test: &Samples, p: &TdsParams) -> Result<TdsOutcome> {
    check_inputs(train, test, p, Mode::General)?;
    let res = p.resolve(test.dim())?;
    let mut diag = Diagnostics { resolved: Some(res), ..Diagnostics::default() };
    let err_thresh = p.eps / 5.0;

    let mp = MomentTestParams { r: res.r, delta: res.delta_moment, rule: res.delta_rule };
    let mom = try_budget!(moment_test(test, &mp), diag);
    diag.moment = Some(mom.clone());
    if !mom.accepted {
        let alpha = match mom.witness {
            Some(Witness::Alpha(a)) => a,
            _ => MultiIndex(vec![0; test.dim()]),
        };
        return Ok(TdsOutcome::reject(RejectReason::MomentFail { alpha }, diag));
    }

    let basis = retrieve(train, p.k, &mut diag)?;
    let cover = match &basis {
        Some(b) => Some(try_budget!(build_sphere_cover(b, res.eps2, p.budgets.cover), diag)),
        None => None,
    };
    let grid = build_threshold_grid(res.grid_step, res.t)?;
    diag.cover_size = cover.as_ref().map_or(0, |c| c.len());
    diag.grid_size = grid.values.len();

    let spectral = spectral_test(test)?;
    diag.spectral = Some(spectral.clone());
    if !spectral.accepted {
        return Ok(TdsOutcome::reject(RejectReason::SpectralFail, diag));
    }

    if let Some(cover) = &cover {
        for u in &cover.points {
            let scan = BandScanner::new(test, u);
            for &theta in &grid.values {
                let v = band_test_general_scan(&scan, theta, res.eps1, res.t);
                diag.band_tests_run += 1;
                if !v.accepted {
                    let reason = band_reason(&v);
                    diag.worst_band = Some(v);
                    return Ok(TdsOutcome::reject(reason, diag));
                }
                if diag.worst_band.as_ref().is_none_or(|w| ratio(&v) > ratio(w)) {
                    diag.worst_band = Some(v);
                }
            }
        }
    }

    let f = match &cover {
        Some(c) => build_candidate_set(
            c,
            Thresholds::Grid(&grid),
            p.k,
            train,
            err_thresh,
            p.budgets.candidates,
        ),
        None => constant_candidates(train, err_thresh),
    };
    finish(f, test, p.eps, diag)
}

/// Dispatches on `p.mode`.
pub fn tds_learn(train: &Labeled, test: &Samples, p: &TdsParams) -> Result<TdsOutcome> {
    match p.mode {
        Mode::Homogeneous => tds_learn_homogeneous(train, test, p),
        Mode::General => tds_learn_general(train, test, p),
    }
}
