//! Ground-truth concepts: intersections of halfspaces and the Monte-Carlo
//! checks (balance, non-degeneracy) used to qualify them.

use serde::{Deserialize, Serialize};

use crate::error::{degenerate, Result, TdsError};
use crate::gaussian::{
    gaussian_with_rng, sample_gaussian, sample_truncated_gaussian, SeededSampler,
};
use crate::linalg::{axpy, dot, norm, normalize, orthonormalize, Samples};

/// `x ↦ +1` iff `wⁱ·x + τⁱ ≥ 0` for every `i`; the empty intersection is the
/// constant `+1` function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConceptRecord", into = "ConceptRecord")]
pub struct HalfspaceIntersection {
    d: usize,
    normals: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
}

/// Wire form of a concept.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConceptRecord {
    k: usize,
    d: usize,
    normals: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
}

impl TryFrom<ConceptRecord> for HalfspaceIntersection {
    type Error = TdsError;

    fn try_from(r: ConceptRecord) -> Result<Self> {
        if r.k != r.normals.len() {
            return Err(degenerate(format!("k = {} but {} normals", r.k, r.normals.len())));
        }
        HalfspaceIntersection::new(r.d, r.normals, r.thresholds)
    }
}

impl From<HalfspaceIntersection> for ConceptRecord {
    fn from(c: HalfspaceIntersection) -> Self {
        ConceptRecord { k: c.k(), d: c.d, normals: c.normals, thresholds: c.thresholds }
    }
}

impl HalfspaceIntersection {
    pub fn new(d: usize, normals: Vec<Vec<f64>>, thresholds: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(degenerate("dimension must be at least 1"));
        }
        if normals.len() != thresholds.len() {
            return Err(degenerate("normals and thresholds differ in length"));
        }
        for w in &normals {
            if w.len() != d {
                return Err(degenerate("normal has wrong dimension"));
            }
            if (norm(w) - 1.0).abs() > 1e-8 {
                return Err(degenerate("normals must be unit vectors"));
            }
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(degenerate("thresholds must be finite"));
        }
        Ok(Self { d, normals, thresholds })
    }

    /// Homogeneous intersection with the given unit normals.
    pub fn homogeneous(d: usize, normals: Vec<Vec<f64>>) -> Result<Self> {
        let k = normals.len();
        Self::new(d, normals, vec![0.0; k])
    }

    /// The constant `+1` concept.
    pub fn everything(d: usize) -> Self {
        Self { d, normals: Vec::new(), thresholds: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.normals.len()
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn is_homogeneous(&self) -> bool {
        self.thresholds.iter().all(|&t| t == 0.0)
    }

    /// Membership without dimension checking.
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        self.normals.iter().zip(&self.thresholds).all(|(w, t)| dot(w, x) + t >= 0.0)
    }

    pub fn label(&self, x: &[f64]) -> Result<i8> {
        if x.len() != self.d {
            return Err(degenerate(format!("point has dimension {}, concept {}", x.len(), self.d)));
        }
        Ok(if self.contains(x) { 1 } else { -1 })
    }

    pub fn labels(&self, xs: &Samples) -> Vec<i8> {
        assert_eq!(xs.dim(), self.d, "sample dimension mismatch");
        xs.rows().map(|x| if self.contains(x) { 1 } else { -1 }).collect()
    }

    /// Fraction of `xs` on which the two concepts disagree.
    pub fn disagreement(&self, other: &Self, xs: &Samples) -> f64 {
        if xs.is_empty() {
            return 0.0;
        }
        let bad = xs.rows().filter(|x| self.contains(x) != other.contains(x)).count();
        bad as f64 / xs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub eta_hat: f64,
    pub n_used: usize,
    pub eta_target: Option<f64>,
}

impl BalanceReport {
    /// Whether the estimate lies in `[eta, 1 − eta]`.
    pub fn is_balanced(&self, eta: f64) -> bool {
        self.eta_hat >= eta && self.eta_hat <= 1.0 - eta
    }
}

/// Fraction of fresh Gaussian samples labelled `+1`.
pub fn estimate_balance(
    c: &HalfspaceIntersection,
    n: usize,
    s: &SeededSampler,
) -> Result<BalanceReport> {
    if n < 100 {
        return Err(TdsError::InsufficientData(format!("balance needs n ≥ 100, got {n}")));
    }
    let xs = sample_gaussian(c.dim(), n, s);
    let pos = xs.rows().filter(|x| c.contains(x)).count();
    Ok(BalanceReport { eta_hat: pos as f64 / n as f64, n_used: n, eta_target: None })
}

/// Result of the Monte-Carlo non-degeneracy estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaEstimate {
    Finite(f64),
    /// Some residual direction shows no detectable variance reduction while
    /// its normal does; no finite β fits.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub subset: Vec<usize>,
    pub normal: usize,
    /// `1 − Var_{N|K}(ŵ′·x)`.
    pub lhs: f64,
    /// `1 − Var_{N|K}(w·x)`.
    pub base: f64,
    pub lhs_stderr: f64,
    pub base_stderr: f64,
    pub ratio: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonDegeneracyReport {
    pub beta_hat: BetaEstimate,
    pub pairs: Vec<PairDiagnostic>,
    pub n_mc: usize,
    pub floor_sigmas: f64,
}

/// Number of standard errors defining the Monte-Carlo noise floor.
pub const NOISE_FLOOR_SIGMAS: f64 = 3.0;

/// Sample variance (1/n) of `v` and the standard error of that estimate.
fn variance_with_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in v {
        let c = (x - mean) * (x - mean);
        m2 += c;
        m4 += c * c;
    }
    m2 /= n;
    m4 /= n;
    (m2, ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

/// Estimates the smallest β for which the concept satisfies the
/// variance-reduction non-degeneracy condition.
///
/// For every subset W of normals and every normal `w` with nonzero residual
/// `w′` off span(W), this compares `1 − Var_{N|K}(ŵ′·x)` against
/// `1 − Var_{N|K}(w·x)`; the required exponent is the log-ratio. This
/// estimator is our own operationalization of the definition: population
/// variances are replaced by truncated-Gaussian Monte Carlo.
pub fn check_non_degeneracy(
    c: &HalfspaceIntersection,
    n_mc: usize,
    s: &SeededSampler,
) -> Result<NonDegeneracyReport> {
    let k = c.k();
    if k > 4 {
        return Err(degenerate(format!("non-degeneracy enumerates 2^k subsets; k = {k} > 4")));
    }
    if n_mc < 100 {
        return Err(TdsError::InsufficientData(format!("n_mc = {n_mc} < 100")));
    }
    let pilot = estimate_balance(c, 20_000, &s.child(0))?;
    if pilot.eta_hat < 1e-3 {
        return Err(TdsError::RegionTooThin(format!("region mass ≈ {}", pilot.eta_hat)));
    }
    let xs = sample_truncated_gaussian(c, n_mc, &s.child(1), usize::MAX)?;
    let d = c.dim();

    let mut pairs = Vec::new();
    let mut beta = 1.0_f64;
    let mut infeasible = false;
    for mask in 0u32..(1 << k) {
        let subset: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let span: Vec<Vec<f64>> = subset.iter().map(|&i| c.normals()[i].clone()).collect();
        let basis = orthonormalize(d, &span);
        for (i, w) in c.normals().iter().enumerate() {
            let mut resid = w.clone();
            axpy(-1.0, &basis.project(w), &mut resid);
            if norm(&resid) <= 1e-9 {
                continue;
            }
            let u = normalize(&resid)?;
            let (var_u, se_u) = variance_with_stderr(&xs.project(&u));
            let (var_w, se_w) = variance_with_stderr(&xs.project(w));
            let (lhs, base) = (1.0 - var_u, 1.0 - var_w);
            let (lhs_floor, base_floor) = (NOISE_FLOOR_SIGMAS * se_u, NOISE_FLOOR_SIGMAS * se_w);
            let (ratio, note) = if lhs <= lhs_floor && base > base_floor {
                infeasible = true;
                (None, "residual shows no variance reduction")
            } else if base <= base_floor {
                (None, "normal's own reduction below noise floor; skipped")
            } else if lhs >= 1.0 || base >= 1.0 {
                (None, "variance numerically zero; skipped")
            } else {
                let r = lhs.ln() / base.ln();
                beta = beta.max(r);
                (Some(r), "")
            };
            pairs.push(PairDiagnostic {
                subset: subset.clone(),
                normal: i,
                lhs,
                base,
                lhs_stderr: se_u,
                base_stderr: se_w,
                ratio,
                note: note.to_string(),
            });
        }
    }
    let beta_hat = if infeasible { BetaEstimate::Infeasible } else { BetaEstimate::Finite(beta) };
    Ok(NonDegeneracyReport { beta_hat, pairs, n_mc, floor_sigmas: NOISE_FLOOR_SIGMAS })
}

/// Number of Gaussian samples used to qualify a random concept's balance.
pub const BALANCE_SAMPLES: usize = 20_000;

/// Draws random intersections until one is `eta_min`-balanced.
///
/// Normals are uniform on the sphere; in general mode thresholds are uniform
/// in `[−1, 1]`.
pub fn random_balanced_intersection(
    d: usize,
    k: usize,
    eta_min: f64,
    homogeneous: bool,
    s: &SeededSampler,
    max_tries: usize,
) -> Result<HalfspaceIntersection> {
    use rand::Rng;
    if k == 0 {
        return Err(degenerate("random intersections need k ≥ 1"));
    }
    for attempt in 0..max_tries as u64 {
        let mut rng = s.child(2 * attempt).rng();
        let raw = gaussian_with_rng(&mut rng, d, k);
        let normals = raw.rows().map(normalize).collect::<Result<Vec<_>>>()?;
        let thresholds = if homogeneous {
            vec![0.0; k]
        } else {
            (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect()
        };
        let c = HalfspaceIntersection::new(d, normals, thresholds)?;
        if estimate_balance(&c, BALANCE_SAMPLES, &s.child(2 * attempt + 1))?.is_balanced(eta_min) {
            return Ok(c);
        }
    }
    Err(TdsError::GenerationFailed(format!(
        "no {eta_min}-balanced intersection of {k} halfspaces in {max_tries} tries"
    )))
}
