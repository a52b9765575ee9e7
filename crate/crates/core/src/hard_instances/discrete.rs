use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{degenerate, Result};
use crate::gaussian::gaussian_moment_1d;

/// A finitely supported distribution on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscreteRecord", into = "DiscreteRecord")]
pub struct Discrete1D {
    support: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DiscreteRecord {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<DiscreteRecord> for Discrete1D {
    type Error = crate::TdsError;

    fn try_from(r: DiscreteRecord) -> Result<Self> {
        Discrete1D::new(r.support, r.weights)
    }
}

impl From<Discrete1D> for DiscreteRecord {
    fn from(d: Discrete1D) -> Self {
        DiscreteRecord { support: d.support, weights: d.weights }
    }
}

#[derive(Default)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.comp += if self.sum.abs() >= x.abs() { (self.sum - t) + x } else { (x - t) + self.sum };
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Tolerance on `Σ weights = 1`.
pub const MASS_TOL: f64 = 1e-12;

impl Discrete1D {
    /// Support must be strictly increasing and finite; weights nonnegative
    /// and summing to one within [`MASS_TOL`].
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(degenerate("support and weights must be nonempty and equal length"));
        }
        if support.iter().any(|x| !x.is_finite()) || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(degenerate("support must be finite and strictly increasing"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(degenerate("weights must be nonnegative"));
        }
        // Compensated running sum: naive summation of 10⁶ weights of 1e-6
        // drifts past MASS_TOL.
        let mut acc = NeumaierSum::default();
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|&w| {
                acc.add(w);
                acc.value()
            })
            .collect();
        let total = acc.value();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(degenerate(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { support, weights, cumulative })
    }

    /// Empirical distribution of `points`, merging exact duplicates.
    pub fn empirical(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(degenerate("empirical distribution of no points"));
        }
        points.sort_by(f64::total_cmp);
        let n = points.len() as f64;
        let mut support: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in points {
            if support.last() == Some(&x) {
                *counts.last_mut().expect("parallel to support") += 1;
            } else {
                support.push(x);
                counts.push(1);
            }
        }
        let weights = counts.iter().map(|&c| c as f64 / n).collect();
        Self::new(support, weights)
    }

    pub fn point_mass(x: f64) -> Self {
        Self::new(vec![x], vec![1.0]).expect("a point mass is valid")
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `E[x^i]`.
    pub fn moment(&self, i: u32) -> f64 {
        self.support.iter().zip(&self.weights).map(|(x, w)| w * x.powi(i as i32)).sum()
    }

    /// Largest `|E[x^i] − E_{N(0,1)}[x^i]|` over `i ≤ degree`.
    pub fn max_moment_error(&self, degree: u32) -> f64 {
        (0..=degree).map(|i| (self.moment(i) - gaussian_moment_1d(i)).abs()).fold(0.0, f64::max)
    }

    /// `Pr[x ≥ t]`.
    pub fn tail_mass(&self, t: f64) -> f64 {
        let i = self.support.partition_point(|&x| x < t);
        self.weights[i..].iter().sum()
    }

    /// This distribution conditioned on `x ≥ t`.
    pub fn condition_at_least(&self, t: f64) -> Result<Self> {
        let i = self.support.partition_point(|&x| x < t);
        let mass: f64 = self.weights[i..].iter().sum();
        if !(mass > 0.0) {
            return Err(degenerate(format!("no mass at or above {t}")));
        }
        let support = self.support[i..].to_vec();
        let mut weights: Vec<f64> = self.weights[i..].iter().map(|w| w / mass).collect();
        let total: f64 = weights.iter().sum();
        if let Some(last) = weights.last_mut() {
            *last += 1.0 - total;
        }
        Self::new(support, weights)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cumulative.last().expect("nonempty");
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.support[i.min(self.support.len() - 1)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::SeededSampler;

    #[test]
    fn validation() {
        assert!(Discrete1D::new(vec![0.0, 1.0], vec![0.5, 0.5]).is_ok());
        assert!(Discrete1D::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(Discrete1D::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(Discrete1D::new(vec![0.0, 1.0], vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn empirical_merges_duplicates() {
        let d = Discrete1D::empirical(vec![2.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(d.support(), &[0.0, 1.0, 2.0]);
        assert_eq!(d.weights(), &[0.25, 0.25, 0.5]);
        assert_eq!(d.tail_mass(1.0), 0.75);
        assert_eq!(d.moment(1), 1.25);
    }

    #[test]
    fn sampling_follows_weights() {
        let d = Discrete1D::new(vec![-1.0, 3.0], vec![0.25, 0.75]).unwrap();
        let mut rng = SeededSampler::new(1, 0).rng();
        let n = 100_000;
        let hits = (0..n).filter(|_| d.sample(&mut rng) == 3.0).count();
        assert!((hits as f64 / n as f64 - 0.75).abs() < 3.0 * (0.1875f64 / n as f64).sqrt());
    }

    #[test]
    fn conditioning() {
        let d = Discrete1D::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.25, 0.25]).unwrap();
        let c = d.condition_at_least(1.0).unwrap();
        assert_eq!(c.weights(), &[0.5, 0.5]);
        assert!(d.condition_at_least(5.0).is_err());
    }
}
