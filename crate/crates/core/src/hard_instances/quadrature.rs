use super::Discrete1D;
use crate::error::{degenerate, Result};
use crate::linalg::SymMatrix;

/// `n`-point Gauss–Hermite rule for the standard Gaussian weight.
///
/// Nodes are the eigenvalues of the Jacobi matrix of the monic Hermite
/// recurrence (off-diagonal `√i`); weights are the squared first components
/// of the unit eigenvectors. The rule integrates polynomials of degree up to
/// `2n − 1` exactly against `N(0, 1)`.
pub fn gauss_hermite(n: usize) -> Result<Discrete1D> {
    if n == 0 {
        return Err(degenerate("quadrature needs at least one node"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match i.abs_diff(j) {
                    1 => (i.max(j) as f64).sqrt(),
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let (nodes, vecs) = SymMatrix::from_rows(&rows)?.eigen();
    let mut weights: Vec<f64> = vecs.iter().map(|v| v[0] * v[0]).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    // Symmetric rule: pin the middle node of odd rules to exactly zero.
    let mut nodes = nodes;
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Discrete1D::new(nodes, weights)
}

/// Multiplies every weight by `1 + noise·u` with `u` uniform on `[−1, 1]`,
/// then renormalizes.
pub fn perturb_weights<R: rand::Rng + ?Sized>(d: &Discrete1D, noise: f64, rng: &mut R) -> Result<Discrete1D> {
    let mut w: Vec<f64> =
        d.weights().iter().map(|w| w * (1.0 + noise * rng.random_range(-1.0..=1.0))).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Discrete1D::new(d.support().to_vec(), w)
}
