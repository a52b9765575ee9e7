use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Discrete1D;
use crate::error::{degenerate, Result};
use crate::gaussian::{standard_normal, SeededSampler};
use crate::linalg::{dot, norm, Samples};

/// `d`-dimensional law whose projection on `direction` is `one_d` and whose
/// orthogonal complement is an independent standard Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedDistribution {
    pub one_d: Discrete1D,
    pub direction: Vec<f64>,
    pub d: usize,
}

impl EmbeddedDistribution {
    pub fn new(one_d: Discrete1D, direction: Vec<f64>) -> Result<Self> {
        if direction.is_empty() || (norm(&direction) - 1.0).abs() > 1e-8 {
            return Err(degenerate("embedding direction must be a unit vector"));
        }
        Ok(Self { d: direction.len(), one_d, direction })
    }

    /// Writes one draw `z·v + (g − (g·v)v)` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = standard_normal(rng);
        }
        let z = self.one_d.sample(rng);
        let shift = z - dot(out, &self.direction);
        for (o, v) in out.iter_mut().zip(&self.direction) {
            *o += shift * v;
        }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Samples {
        let mut data = vec![0.0; n * self.d];
        for row in data.chunks_exact_mut(self.d) {
            self.sample_into(rng, row);
        }
        Samples::from_flat(self.d, data)
    }
}

pub fn embed_hidden_direction(dist: &Discrete1D, v: &[f64], n: usize, s: &SeededSampler) -> Result<Samples> {
    let e = EmbeddedDistribution::new(dist.clone(), v.to_vec())?;
    Ok(e.sample_with(&mut s.rng(), n))
}
