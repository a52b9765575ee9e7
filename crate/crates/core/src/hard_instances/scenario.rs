//! Train/test generators for the experiment harness.
//!
//! A [`Scenario`] fixes the concept used to label training data, the law of
//! the test marginal and what outcome the learner is expected to produce.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::embed::EmbeddedDistribution;
use super::lp::{exact_moment_match_lp, DEFAULT_FLOOR};
use super::quadrature::{gauss_hermite, perturb_weights};
use super::relocated::build_hard_instance;
use crate::concepts::{random_balanced_intersection, HalfspaceIntersection};
use crate::error::{degenerate, Result};
use crate::gaussian::{gaussian_with_rng, standard_normal, streams, SeededSampler};
use crate::linalg::{dot, normalize, unit_vector, Labeled, Samples};
use crate::tds::TdsOutcome;

/// Draws allowed when searching for a balanced random truth.
pub const TRUTH_TRIES: usize = 200;
/// Initial and maximal number of draws for the discretized hard instance.
pub const HARD_K_START: usize = 20_000;
pub const HARD_K_CAP: usize = 2_000_000;
/// The reference halfspace of the biased scenario sits this far below the
/// relocated atom so that points placed exactly at `t` are inside it.
pub const BOUNDARY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioKind {
    /// Test marginal equals the training marginal.
    NullShift,
    /// Test marginal `N(shift·e₁, I)`.
    MeanShift {
        #[serde(default = "defaults::shift")]
        shift: f64,
    },
    /// Test marginal `N(0, factor·I)`.
    CovInflation {
        #[serde(default = "defaults::factor")]
        factor: f64,
    },
    /// `(1 − mass)·N + mass·(Gaussian on the hyperplane normal to the first
    /// truth normal)`.
    SubspaceConcentration {
        #[serde(default = "defaults::mass")]
        mass: f64,
    },
    /// A perturbed Gauss–Hermite rule repaired by the moment-matching LP,
    /// embedded along a random hidden direction.
    NgcaEmbedded {
        #[serde(default = "defaults::nodes")]
        nodes: usize,
        #[serde(default = "defaults::degree")]
        degree: u32,
        #[serde(default = "defaults::noise")]
        noise: f64,
    },
    /// Training labels all −1; test is `(1 − 10ε)·N + 10ε·(tail of the
    /// relocated instance along a hidden v)`.
    BiasedHalfspace {
        #[serde(default = "defaults::biased_eps")]
        eps: f64,
    },
}

mod defaults {
    pub fn shift() -> f64 {
        1.0
    }
    pub fn factor() -> f64 {
        4.0
    }
    pub fn mass() -> f64 {
        0.1
    }
    pub fn nodes() -> usize {
        6
    }
    pub fn degree() -> u32 {
        8
    }
    pub fn noise() -> f64 {
        1e-6
    }
    pub fn biased_eps() -> f64 {
        0.02
    }
}

impl ScenarioKind {
    /// Every accepted value of the `kind` tag.
    pub const NAMES: [&'static str; 6] = [
        "null-shift",
        "mean-shift",
        "cov-inflation",
        "subspace-concentration",
        "ngca-embedded",
        "biased-halfspace",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::NullShift => "null-shift",
            Self::MeanShift { .. } => "mean-shift",
            Self::CovInflation { .. } => "cov-inflation",
            Self::SubspaceConcentration { .. } => "subspace-concentration",
            Self::NgcaEmbedded { .. } => "ngca-embedded",
            Self::BiasedHalfspace { .. } => "biased-halfspace",
        }
    }
}

/// How the random ground truth is drawn. Ignored by the biased scenario,
/// whose reference concept is a single far-out halfspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub d: usize,
    pub k: usize,
    pub eta_min: f64,
    pub homogeneous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum TestDistribution {
    Gaussian { d: usize },
    Shifted { mean: Vec<f64> },
    Scaled { d: usize, scale: f64 },
    /// Standard Gaussian projected onto the hyperplane `normal·x = 0`.
    Hyperplane { normal: Vec<f64> },
    Embedded(EmbeddedDistribution),
    /// Components with mixing weights summing to one.
    Mixture { parts: Vec<(f64, TestDistribution)> },
}

impl TestDistribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { d } | Self::Scaled { d, .. } => *d,
            Self::Shifted { mean } => mean.len(),
            Self::Hyperplane { normal } => normal.len(),
            Self::Embedded(e) => e.d,
            Self::Mixture { parts } => parts.first().map_or(0, |(_, p)| p.dim()),
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Gaussian { .. } => out.iter_mut().for_each(|o| *o = standard_normal(rng)),
            Self::Shifted { mean } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    *o = m + standard_normal(rng);
                }
            }
            Self::Scaled { scale, .. } => out.iter_mut().for_each(|o| *o = scale * standard_normal(rng)),
            Self::Hyperplane { normal } => {
                out.iter_mut().for_each(|o| *o = standard_normal(rng));
                let c = dot(out, normal);
                for (o, v) in out.iter_mut().zip(normal) {
                    *o -= c * v;
                }
            }
            Self::Embedded(e) => e.sample_into(rng, out),
            Self::Mixture { parts } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, p) in parts {
                    acc += w;
                    if u < acc {
                        return p.sample_into(rng, out);
                    }
                }
                parts.last().expect("mixtures are nonempty").1.sample_into(rng, out)
            }
        }
    }

    pub fn sample(&self, n: usize, s: &SeededSampler) -> Samples {
        let d = self.dim();
        let mut rng = s.rng();
        let mut data = vec![0.0; n * d];
        for row in data.chunks_exact_mut(d) {
            self.sample_into(&mut rng, row);
        }
        Samples::from_flat(d, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainLabels {
    /// Labels given by the truth concept.
    Truth,
    /// Every training label is −1.
    AllNegative,
}

/// What the scenario predicts for the learner. Only the biased dichotomy is
/// a hard contract; the others are recorded as expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "kebab-case")]
pub enum Expectation {
    /// Equal marginals: the learner should accept.
    Accept,
    /// Either outcome is allowed; soundness is checked on accepts.
    Either,
    /// The spectral test should fire.
    SpectralReject,
    /// Reject, or accept with positive mass at most `4·eps` on the test sample.
    BiasedDichotomy { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyCheck {
    /// False only when a hard contract is broken.
    pub contract_ok: bool,
    /// Whether the soft expectation held.
    pub expectation_met: bool,
    /// Empirical positive mass of the hypothesis on the test sample, when
    /// the biased check ran.
    pub lambda_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub truth: HalfspaceIntersection,
    pub train_labels: TrainLabels,
    pub test: TestDistribution,
    pub expectation: Expectation,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.truth.dim()
    }

    /// `m` Gaussian training points labelled per [`TrainLabels`].
    pub fn train(&self, m: usize, seed: u64) -> Labeled {
        let x = crate::gaussian::sample_gaussian(self.dim(), m, &SeededSampler::new(seed, streams::TRAIN));
        let y = match self.train_labels {
            TrainLabels::Truth => self.truth.labels(&x),
            TrainLabels::AllNegative => vec![-1; m],
        };
        Labeled::new(x, y)
    }

    pub fn test_sample(&self, m: usize, seed: u64) -> Samples {
        self.test.sample(m, &SeededSampler::new(seed, streams::TEST))
    }

    /// Fresh test-distribution draws, independent of the learner's input.
    pub fn holdout(&self, m: usize, seed: u64) -> Samples {
        self.test.sample(m, &SeededSampler::new(seed, streams::HOLDOUT))
    }

    pub fn check(&self, outcome: &TdsOutcome, test: &Samples) -> DichotomyCheck {
        let accepted = outcome.accepted();
        match self.expectation {
            Expectation::Accept => DichotomyCheck { contract_ok: true, expectation_met: accepted, lambda_hat: None },
            Expectation::Either => DichotomyCheck { contract_ok: true, expectation_met: true, lambda_hat: None },
            Expectation::SpectralReject => DichotomyCheck {
                contract_ok: true,
                expectation_met: matches!(
                    outcome.verdict,
                    crate::tds::Verdict::Reject(crate::tds::RejectReason::SpectralFail)
                ),
                lambda_hat: None,
            },
            Expectation::BiasedDichotomy { eps } => match &outcome.hypothesis {
                Some(h) if accepted => {
                    let pos = test.rows().filter(|x| h.contains(x)).count();
                    let lambda = pos as f64 / test.len().max(1) as f64;
                    let ok = lambda <= 4.0 * eps;
                    DichotomyCheck { contract_ok: ok, expectation_met: false, lambda_hat: Some(lambda) }
                }
                _ => DichotomyCheck { contract_ok: true, expectation_met: true, lambda_hat: None },
            },
        }
    }
}

fn random_direction(d: usize, s: &SeededSampler) -> Result<Vec<f64>> {
    let g = gaussian_with_rng(&mut s.rng(), d, 1);
    normalize(g.row(0))
}

/// Builds the scenario for one seed. Pure given `(kind, truth, seed)`.
pub fn make_scenario(kind: &ScenarioKind, truth: &TruthSpec, seed: u64) -> Result<Scenario> {
    let d = truth.d;
    if d == 0 || truth.k == 0 {
        return Err(degenerate("scenarios need d ≥ 1 and k ≥ 1"));
    }
    let aux = SeededSampler::new(seed, streams::SCENARIO);
    let draw_truth = || {
        random_balanced_intersection(
            d,
            truth.k,
            truth.eta_min,
            truth.homogeneous,
            &SeededSampler::new(seed, streams::TRUTH),
            TRUTH_TRIES,
        )
    };
    let gaussian = TestDistribution::Gaussian { d };
    let scenario = |truth, test, expectation| Scenario {
        kind: kind.clone(),
        truth,
        train_labels: TrainLabels::Truth,
        test,
        expectation,
    };
    Ok(match *kind {
        ScenarioKind::NullShift => scenario(draw_truth()?, gaussian, Expectation::Accept),
        ScenarioKind::MeanShift { shift } => {
            let mean = crate::linalg::scaled(&unit_vector(d, 0), shift);
            scenario(draw_truth()?, TestDistribution::Shifted { mean }, Expectation::Either)
        }
        ScenarioKind::CovInflation { factor } => {
            if !(factor > 0.0) {
                return Err(degenerate(format!("covariance factor {factor} must be positive")));
            }
            let test = TestDistribution::Scaled { d, scale: factor.sqrt() };
            let expect = if factor >= 2.0 { Expectation::SpectralReject } else { Expectation::Either };
            scenario(draw_truth()?, test, expect)
        }
        ScenarioKind::SubspaceConcentration { mass } => {
            if !(0.0..=1.0).contains(&mass) {
                return Err(degenerate(format!("mass {mass} outside [0, 1]")));
            }
            let t = draw_truth()?;
            let normal = t.normals()[0].clone();
            let test = TestDistribution::Mixture {
                parts: vec![(1.0 - mass, gaussian), (mass, TestDistribution::Hyperplane { normal })],
            };
            scenario(t, test, Expectation::Either)
        }
        ScenarioKind::NgcaEmbedded { nodes, degree, noise } => {
            let d0 = perturb_weights(&gauss_hermite(nodes)?, noise, &mut aux.child(0).rng())?;
            let matched = exact_moment_match_lp(&d0, degree, DEFAULT_FLOOR)?;
            let v = random_direction(d, &aux.child(1))?;
            let test = TestDistribution::Embedded(EmbeddedDistribution::new(matched.dist, v)?);
            scenario(draw_truth()?, test, Expectation::Either)
        }
        ScenarioKind::BiasedHalfspace { eps } => {
            if !(eps > 0.0 && 10.0 * eps < 1.0) {
                return Err(degenerate(format!("biased scenario needs 0 < 10ε < 1, got ε = {eps}")));
            }
            let hard = build_hard_instance(eps, HARD_K_START, HARD_K_CAP, &aux.child(0))?;
            let tail = hard.dist.condition_at_least(hard.t)?;
            let v = random_direction(d, &aux.child(1))?;
            let reference = HalfspaceIntersection::new(d, vec![v.clone()], vec![-(hard.t - BOUNDARY_MARGIN)])?;
            let test = TestDistribution::Mixture {
                parts: vec![
                    (1.0 - 10.0 * eps, gaussian),
                    (10.0 * eps, TestDistribution::Embedded(EmbeddedDistribution::new(tail, v)?)),
                ],
            };
            Scenario {
                kind: kind.clone(),
                truth: reference,
                train_labels: TrainLabels::AllNegative,
                test,
                expectation: Expectation::BiasedDichotomy { eps },
            }
        }
    })
}
