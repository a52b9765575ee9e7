//! Accept/reject tests run on the unlabelled test sample.

use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::covers::CandidateSet;
use crate::error::{degenerate, Result, TdsError};
use crate::gaussian::{enumerate_multi_indices, gaussian_moment_multi, MultiIndex, MULTI_INDEX_CAP};
use crate::linalg::{dot, empirical_mean_cov, Samples};

/// Spectral-norm threshold on the test covariance.
pub const SPECTRAL_THRESHOLD: f64 = 2.0;

/// What a test was looking at when it produced its statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    Alpha(MultiIndex),
    Band { direction: Vec<f64>, theta: f64 },
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub accepted: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub witness: Option<Witness>,
}

impl TestVerdict {
    /// Accepts exactly when `statistic ≤ threshold`.
    pub fn new(statistic: f64, threshold: f64, witness: Option<Witness>) -> Self {
        Self { accepted: statistic <= threshold, statistic, threshold, witness }
    }
}

/// Rejects when the largest eigenvalue of the centered test covariance
/// exceeds 2.
pub fn spectral_test(x: &Samples) -> Result<TestVerdict> {
    let (_, cov) = empirical_mean_cov(x)?;
    Ok(TestVerdict::new(cov.max_eigenvalue(), SPECTRAL_THRESHOLD, None))
}

/// Sorted projections of a sample onto one direction, for repeated slab
/// queries.
#[derive(Debug, Clone)]
pub struct BandScanner {
    direction: Vec<f64>,
    sorted: Vec<f64>,
}

impl BandScanner {
    pub fn new(x: &Samples, u: &[f64]) -> Self {
        let mut sorted = x.project(u);
        sorted.sort_by(f64::total_cmp);
        Self { direction: u.to_vec(), sorted }
    }

    /// Number of points with `|u·x + θ| ≤ γ`.
    pub fn count(&self, theta: f64, gamma: f64) -> usize {
        let lo = self.sorted.partition_point(|&p| p + theta < -gamma);
        let hi = self.sorted.partition_point(|&p| p + theta <= gamma);
        hi.saturating_sub(lo)
    }

    /// Fraction of points with `|u·x + θ| ≤ γ`.
    pub fn mass(&self, theta: f64, gamma: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.count(theta, gamma) as f64 / self.sorted.len() as f64
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }
}

/// Half-width and mass threshold of the homogeneous band test.
pub fn homogeneous_band(eps1: f64) -> (f64, f64) {
    let e = eps1.powf(2.0 / 3.0);
    (2.0 * e, 5.0 * e)
}

/// Half-width γ = 10(ε′T + ε′^{2/3}) of the general band test; the mass
/// threshold is 5γ.
pub fn general_band_gamma(eps1: f64, t: f64) -> f64 {
    10.0 * (eps1 * t + eps1.powf(2.0 / 3.0))
}

fn check_eps1(eps1: f64) -> Result<()> {
    if !(eps1 > 0.0 && eps1 < 0.5) {
        return Err(degenerate(format!("ε′ = {eps1} outside (0, 1/2)")));
    }
    Ok(())
}

/// Rejects when more than `5ε′^{2/3}` of the sample lies within `2ε′^{2/3}`
/// of the hyperplane `u·x = 0`.
pub fn band_test_homogeneous(u: &[f64], x: &Samples, eps1: f64) -> Result<TestVerdict> {
    check_eps1(eps1)?;
    Ok(band_test_homogeneous_scan(&BandScanner::new(x, u), eps1))
}

pub fn band_test_homogeneous_scan(scan: &BandScanner, eps1: f64) -> TestVerdict {
    let (half, thr) = homogeneous_band(eps1);
    let w = Witness::Band { direction: scan.direction.clone(), theta: 0.0 };
    TestVerdict::new(scan.mass(0.0, half), thr, Some(w))
}

/// Rejects when more than `5γ` of the sample lies within `γ` of the
/// hyperplane `u·x + θ = 0`.
pub fn band_test_general(
    u: &[f64],
    theta: f64,
    x: &Samples,
    eps1: f64,
    t: f64,
) -> Result<TestVerdict> {
    check_eps1(eps1)?;
    if theta.abs() > t + 1e-12 {
        return Err(degenerate(format!("|θ| = {} exceeds T = {t}", theta.abs())));
    }
    Ok(band_test_general_scan(&BandScanner::new(x, u), theta, eps1, t))
}

pub fn band_test_general_scan(scan: &BandScanner, theta: f64, eps1: f64, t: f64) -> TestVerdict {
    let gamma = general_band_gamma(eps1, t);
    let w = Witness::Band { direction: scan.direction.clone(), theta };
    TestVerdict::new(scan.mass(theta, gamma), 5.0 * gamma, Some(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRule {
    /// Every moment must be within Δ.
    Strict,
    /// Moment α must be within Δ + 3σ̂_α/√n, allowing for sampling noise.
    SamplingAdjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTestParams {
    pub r: u32,
    pub delta: f64,
    pub rule: DeltaRule,
}

impl MomentTestParams {
    /// `Δ = d^{−r}`.
    pub fn default_delta(d: usize, r: u32) -> f64 {
        (d as f64).powi(-(r as i32))
    }
}

/// Compares all moments of degree 1..=r against the standard Gaussian.
///
/// Under the sampling-adjusted rule the reported statistic and threshold
/// belong to the index with the worst ratio `|diff| / threshold`, so the
/// verdict still reads `statistic ≤ threshold`.
pub fn moment_test(x: &Samples, p: &MomentTestParams) -> Result<TestVerdict> {
    if x.is_empty() {
        return Err(TdsError::InsufficientData("moment test on an empty sample".into()));
    }
    let n = x.len();
    let w = 1.0 / n as f64;
    moment_test_weighted(x.rows().map(|r| (r, w)), x.dim(), n, p)
}

/// Moment test on a weighted point set, e.g. an exact finite distribution.
/// `n_eff` scales the sampling-adjusted allowance.
pub fn moment_test_weighted<'a>(
    points: impl Iterator<Item = (&'a [f64], f64)>,
    d: usize,
    n_eff: usize,
    p: &MomentTestParams,
) -> Result<TestVerdict> {
    if p.r < 1 || !(p.delta > 0.0) {
        return Err(degenerate("moment test needs r ≥ 1 and Δ > 0"));
    }
    let alphas: Vec<MultiIndex> = enumerate_multi_indices(d, p.r, MULTI_INDEX_CAP)?
        .into_iter()
        .filter(|a| a.degree() > 0)
        .collect();
    let sparse: Vec<Vec<(usize, usize)>> = alphas
        .iter()
        .map(|a| a.0.iter().enumerate().filter(|(_, &e)| e > 0).map(|(j, &e)| (j, e as usize)).collect())
        .collect();
    let r = p.r as usize;
    let mut sum = vec![0.0; alphas.len()];
    let mut sum_sq = vec![0.0; alphas.len()];
    let mut pw = vec![1.0; d * (r + 1)];
    for (x, wt) in points {
        for j in 0..d {
            for e in 1..=r {
                pw[j * (r + 1) + e] = pw[j * (r + 1) + e - 1] * x[j];
            }
        }
        for (a, terms) in sparse.iter().enumerate() {
            let v: f64 = terms.iter().map(|&(j, e)| pw[j * (r + 1) + e]).product();
            sum[a] += wt * v;
            sum_sq[a] += wt * v * v;
        }
    }
    let mut worst: Option<(f64, f64, f64, usize)> = None;
    for a in 0..alphas.len() {
        let diff = (sum[a] - gaussian_moment_multi(&alphas[a])).abs();
        let thr = match p.rule {
            DeltaRule::Strict => p.delta,
            DeltaRule::SamplingAdjusted => {
                let sd = (sum_sq[a] - sum[a] * sum[a]).max(0.0).sqrt();
                p.delta + 3.0 * sd / (n_eff as f64).sqrt()
            }
        };
        let ratio = diff / thr;
        if worst.is_none_or(|(r0, ..)| ratio > r0) {
            worst = Some((ratio, diff, thr, a));
        }
    }
    Ok(match worst {
        Some((_, diff, thr, a)) => {
            TestVerdict::new(diff, thr, Some(Witness::Alpha(alphas[a].clone())))
        }
        None => TestVerdict::new(0.0, p.delta, None),
    })
}

/// Cap on `|F| · |X|` bits held in memory by the discrepancy test.
pub const DISCREPANCY_BIT_BUDGET: u128 = 16_000_000_000;

/// Largest pairwise disagreement of the candidates on `x`; rejects above
/// `ε/2`.
///
/// The maximum is exact. Disagreement is a metric, so with `dᵢ` the distance
/// of member `i` to a fixed pivot, no pair can beat `dᵢ + dⱼ`; scanning
/// members by decreasing `dᵢ` lets most pairs be skipped.
pub fn discrepancy_test(f: &CandidateSet, x: &Samples, eps: f64) -> Result<TestVerdict> {
    let thr = eps / 2.0;
    if f.len() <= 1 || x.is_empty() {
        return Ok(TestVerdict::new(0.0, thr, None));
    }
    let m = x.len();
    let bits = f.len() as u128 * m as u128;
    if bits > DISCREPANCY_BIT_BUDGET {
        return Err(TdsError::BudgetExceeded {
            what: "discrepancy member masks (bits)".into(),
            count: bits,
            cap: DISCREPANCY_BIT_BUDGET,
        });
    }
    let masks = member_masks(f, x);

    let pivot = f.best_index().unwrap_or(0);
    let dist: Vec<usize> = masks.iter().map(|mk| mk.xor_count(&masks[pivot])).collect();
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| dist[b].cmp(&dist[a]).then(a.cmp(&b)));

    let mut best = dist[order[0]];
    let mut pair = (pivot.min(order[0]), pivot.max(order[0]));
    for (ia, &a) in order.iter().enumerate() {
        if let Some(&next) = order.get(ia + 1) {
            if dist[a] + dist[next] <= best {
                break;
            }
        }
        for &b in &order[ia + 1..] {
            if dist[a] + dist[b] <= best {
                break;
            }
            let dab = masks[a].xor_count(&masks[b]);
            if dab > best {
                best = dab;
                pair = (a.min(b), a.max(b));
            }
        }
    }
    Ok(TestVerdict::new(best as f64 / m as f64, thr, Some(Witness::Pair(pair.0, pair.1))))
}

/// Membership bitsets of every candidate on `x`, sharing work across atoms.
fn member_masks(f: &CandidateSet, x: &Samples) -> Vec<BitSet> {
    let m = x.len();
    let mut used = vec![false; f.atoms.len()];
    for ids in &f.member_atoms {
        for &a in ids {
            used[a] = true;
        }
    }
    let mut atom_masks: Vec<Option<BitSet>> = vec![None; f.atoms.len()];
    let mut last_dir: Option<(usize, Vec<f64>)> = None;
    for (i, atom) in f.atoms.iter().enumerate() {
        if !used[i] {
            continue;
        }
        let proj = match &last_dir {
            Some((d, p)) if *d == atom.direction => p,
            _ => {
                last_dir = Some((atom.direction, x.rows().map(|r| dot(&atom.normal, r)).collect()));
                &last_dir.as_ref().expect("just set").1
            }
        };
        atom_masks[i] = Some(BitSet::from_fn(m, |j| proj[j] + atom.threshold >= 0.0));
    }
    f.member_atoms
        .iter()
        .map(|ids| {
            ids.iter().fold(BitSet::ones(m), |acc, &a| {
                acc.and(atom_masks[a].as_ref().expect("used atom has a mask"))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::HalfspaceIntersection;
    use crate::gaussian::{sample_gaussian, std_normal_cdf, SeededSampler};
    use crate::linalg::unit_vector;

    fn gauss(d: usize, n: usize, seed: u64) -> Samples {
        sample_gaussian(d, n, &SeededSampler::new(seed, 0))
    }

    #[test]
    fn spectral_examples() {
        let x = gauss(5, 100_000, 1);
        let v = spectral_test(&x).unwrap();
        assert!(v.accepted && (v.statistic - 1.0).abs() < 0.05);
        let x2 = x.map_rows(|s, t| t.iter_mut().zip(s).for_each(|(o, i)| *o = 2.0 * i));
        let v = spectral_test(&x2).unwrap();
        assert!(!v.accepted && (v.statistic - 4.0).abs() < 0.2);
        let same = Samples::from_rows(2, &[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(spectral_test(&same).unwrap().statistic, 0.0);
    }

    #[test]
    fn homogeneous_band_examples() {
        let x = gauss(3, 100_000, 2);
        let u = unit_vector(3, 0);
        let v = band_test_homogeneous(&u, &x, 0.001).unwrap();
        let expect = 2.0 * (std_normal_cdf(0.02) - 0.5);
        assert!(v.accepted);
        assert!((v.statistic - expect).abs() < 0.002);
        assert!((v.threshold - 0.05).abs() < 1e-12);

        let flat = x.map_rows(|s, t| {
            t.copy_from_slice(s);
            t[0] = 0.0;
        });
        assert!(!band_test_homogeneous(&u, &flat, 0.001).unwrap().accepted);

        let v = band_test_homogeneous(&u, &x, 0.1).unwrap();
        assert!(v.threshold > 1.0 && v.accepted);
        assert!(band_test_homogeneous(&u, &x, 0.5).is_err());
    }

    #[test]
    fn general_band_examples() {
        let x = gauss(3, 100_000, 3);
        let u = unit_vector(3, 0);
        let v = band_test_general(&u, 1.0, &x, 0.001, 2.0).unwrap();
        assert!((v.threshold - 0.6).abs() < 1e-12);
        let expect = std_normal_cdf(-0.88) - std_normal_cdf(-1.12);
        assert!((v.statistic - expect).abs() < 0.003 && v.accepted);
        let spike = Samples::from_rows(3, &vec![vec![-1.0, 0.0, 0.0]; 10]);
        assert!(!band_test_general(&u, 1.0, &spike, 0.001, 2.0).unwrap().accepted);
        assert!(band_test_general(&u, 3.0, &x, 0.001, 2.0).is_err());
        // With T → 0 the general half-width is five times the homogeneous one.
        let (h, _) = homogeneous_band(0.001);
        assert!((general_band_gamma(0.001, 0.0) - 5.0 * h).abs() < 1e-15);
    }

    #[test]
    fn scanner_matches_direct_count() {
        let x = gauss(2, 2_000, 4);
        let u = [0.6, 0.8];
        let scan = BandScanner::new(&x, &u);
        for &(theta, gamma) in &[(0.0, 0.1), (0.5, 0.3), (-1.2, 0.05), (2.0, 0.0)] {
            let direct = x.rows().filter(|r| (dot(&u, r) + theta).abs() <= gamma).count();
            assert_eq!(scan.count(theta, gamma), direct);
        }
    }

    #[test]
    fn moment_examples() {
        let p = MomentTestParams { r: 3, delta: 4f64.powi(-3), rule: DeltaRule::SamplingAdjusted };
        assert!(moment_test(&gauss(4, 100_000, 5), &p).unwrap().accepted);
        let shifted = gauss(4, 100_000, 6).map_rows(|s, t| {
            t.copy_from_slice(s);
            t[0] += 1.0;
        });
        let p1 = MomentTestParams { r: 1, ..p };
        let v = moment_test(&shifted, &p1).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.witness, Some(Witness::Alpha(MultiIndex(vec![1, 0, 0, 0]))));
        assert!((v.statistic - 1.0).abs() < 0.02);
        // With r = 3 the cubic moment E[(g + 1)³] = 4 dominates.
        let v = moment_test(&shifted, &p).unwrap();
        assert!(!v.accepted);
        assert_eq!(v.witness, Some(Witness::Alpha(MultiIndex(vec![3, 0, 0, 0]))));
        assert!((v.statistic - 4.0).abs() < 0.1);
    }

    fn members(ms: Vec<HalfspaceIntersection>) -> CandidateSet {
        CandidateSet::from_members(ms)
    }

    #[test]
    fn discrepancy_examples() {
        let x = gauss(2, 100_000, 7);
        let a = HalfspaceIntersection::homogeneous(2, vec![unit_vector(2, 0)]).unwrap();
        let v = discrepancy_test(&members(vec![a.clone()]), &x, 0.2).unwrap();
        assert!(v.accepted && v.statistic == 0.0);

        let b = HalfspaceIntersection::homogeneous(2, vec![unit_vector(2, 1)]).unwrap();
        let v = discrepancy_test(&members(vec![a.clone(), b]), &x, 0.5).unwrap();
        assert!((v.statistic - 0.5).abs() < 0.01 && !v.accepted);

        let c = HalfspaceIntersection::homogeneous(2, vec![vec![0.01f64.cos(), 0.01f64.sin()]])
            .unwrap();
        let v = discrepancy_test(&members(vec![a, c]), &x, 0.2).unwrap();
        assert!((v.statistic - 0.01 / std::f64::consts::PI).abs() < 0.002 && v.accepted);
    }

    #[test]
    fn discrepancy_matches_brute_force() {
        let x = gauss(3, 3_000, 8);
        let s = SeededSampler::new(9, 0);
        let ms: Vec<_> = (0..12)
            .map(|i| {
                crate::concepts::random_balanced_intersection(3, 1 + i % 2, 0.05, false, &s.child(i as u64), 50)
                    .unwrap()
            })
            .collect();
        let mut brute = 0.0_f64;
        for i in 0..ms.len() {
            for j in i + 1..ms.len() {
                brute = brute.max(ms[i].disagreement(&ms[j], &x));
            }
        }
        let v = discrepancy_test(&members(ms), &x, 0.1).unwrap();
        assert_eq!(v.statistic, brute);
    }
}
