//! Subspace retrieval by PCA on the positive training examples.
//!
//! Truncating a Gaussian to an intersection of halfspaces shrinks the variance
//! along the normals and leaves orthogonal directions untouched, so the
//! smallest-variance principal components of the positives approximately span
//! the normals. The covariance is centered: for general thresholds the
//! positive region has nonzero mean.

use serde::{Deserialize, Serialize};

use crate::error::{degenerate, Result, TdsError};
use crate::linalg::{empirical_mean_cov, smallest_k_eigenpairs, Labeled, OrthonormalBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedSubspace {
    pub basis: OrthonormalBasis,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub n_positives: usize,
    /// Basis directions along which the positives have no spread at all.
    pub degenerate_directions: usize,
}

/// The `k` smallest-variance principal directions of the positives.
pub fn retrieve_subspace_pca(train: &Labeled, k: usize) -> Result<RetrievedSubspace> {
    let d = train.x.dim();
    if k == 0 || k > d {
        return Err(degenerate(format!("retrieval needs 1 ≤ k ≤ d, got k = {k}, d = {d}")));
    }
    let pos = train.positives();
    if pos.len() < k + 1 {
        return Err(TdsError::InsufficientData(format!(
            "{} positive examples, need at least {}",
            pos.len(),
            k + 1
        )));
    }
    let (_, cov) = empirical_mean_cov(&pos)?;
    let (eigenvalues, basis) = smallest_k_eigenpairs(&cov, k)?;
    let scale = (0..d).map(|i| cov.get(i, i)).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let degenerate_directions = eigenvalues.iter().filter(|&&l| l <= 1e-12 * scale).count();
    Ok(RetrievedSubspace { basis, eigenvalues, n_positives: pos.len(), degenerate_directions })
}
