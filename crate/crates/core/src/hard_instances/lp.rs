use minilp::{ComparisonOp, Error as LpError, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Discrete1D;
use crate::error::{degenerate, Result, TdsError};
use crate::gaussian::gaussian_moment_1d;

/// Default lower bound on the reweighting factors `μ_x`.
pub const DEFAULT_FLOOR: f64 = 0.9;
/// Post-verification tolerance on every moment.
pub const MOMENT_TOL: f64 = 1e-8;
/// Slack allowed below the floor after refinement.
pub const FLOOR_TOL: f64 = 1e-9;

const REFINE_ROUNDS: usize = 8;
// Variables this close to the floor are held fixed during refinement.
const ACTIVE_MARGIN: f64 = 1e-7;

/// A reweighting `w₁(x) = μ_x·w₀(x)` of a finite distribution whose moments
/// up to `degree` equal those of `N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatch {
    pub dist: Discrete1D,
    pub mu: Vec<f64>,
    pub degree: u32,
    pub floor: f64,
    /// Largest `|E_{D₁}[xⁱ] − E_N[xⁱ]|` over `i ≤ degree`.
    pub max_moment_error: f64,
}

impl MomentMatch {
    pub fn min_mu(&self) -> f64 {
        self.mu.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Orthonormal probabilists' Hermite polynomials `h₀..h_degree` at `x`.
/// `E_N[h_i] = [i = 0]`.
pub fn hermite_normalized(x: f64, degree: u32) -> Vec<f64> {
    let mut h = Vec::with_capacity(degree as usize + 1);
    h.push(1.0);
    if degree >= 1 {
        h.push(x);
    }
    for i in 1..degree as usize {
        let next = (x * h[i] - (i as f64).sqrt() * h[i - 1]) / ((i + 1) as f64).sqrt();
        h.push(next);
    }
    h
}

/// Finds `μ_x ≥ floor` on the support of `d0` so that `μ·w₀` matches the
/// Gaussian moments of degree `0..=degree` exactly (up to [`MOMENT_TOL`]).
///
/// The degree-0 constraint forces total mass one. On infeasibility the error
/// carries a polynomial `p` with `p ≥ 0` on the support and
/// `E_N[p] < floor·E_{D₀}[p]`, which rules out every such `μ`.
pub fn exact_moment_match_lp(d0: &Discrete1D, degree: u32, floor: f64) -> Result<MomentMatch> {
    if !(0.0..1.0).contains(&floor) {
        return Err(degenerate(format!("floor {floor} outside [0, 1)")));
    }
    let xs = d0.support();
    let w0 = d0.weights();
    let m = degree as usize + 1;
    // a[i][j] = w₀(x_j)·h_i(x_j)
    let herm: Vec<Vec<f64>> = xs.iter().map(|&x| hermite_normalized(x, degree)).collect();
    let a: Vec<Vec<f64>> = (0..m).map(|i| (0..xs.len()).map(|j| w0[j] * herm[j][i]).collect()).collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = xs.iter().map(|_| lp.add_var(0.0, (floor, f64::INFINITY))).collect();
    for (i, row) in a.iter().enumerate() {
        let expr: Vec<_> = vars.iter().zip(row).map(|(&v, &c)| (v, c)).collect();
        lp.add_constraint(expr, ComparisonOp::Eq, if i == 0 { 1.0 } else { 0.0 });
    }
    let mut mu = match lp.solve() {
        Ok(sol) => vars.iter().map(|&v| sol[v]).collect::<Vec<f64>>(),
        Err(LpError::Infeasible) => {
            return Err(TdsError::Infeasible { certificate: dual_certificate(&a, floor) });
        }
        Err(LpError::Unbounded) => unreachable!("zero objective cannot be unbounded"),
    };

    refine(&mut mu, xs, w0, degree, floor);

    let weights: Vec<f64> = mu.iter().zip(w0).map(|(m, w)| m * w).collect();
    let max_moment_error = moment_error(xs, &weights, degree);
    let min_mu = mu.iter().copied().fold(f64::INFINITY, f64::min);
    if max_moment_error > MOMENT_TOL || min_mu < floor - FLOOR_TOL {
        return Err(TdsError::GenerationFailed(format!(
            "solver output failed post-verification: moment error {max_moment_error:e}, min μ {min_mu}"
        )));
    }
    let dist = Discrete1D::new(xs.to_vec(), weights)?;
    Ok(MomentMatch { dist, mu, degree, floor, max_moment_error })
}

fn moment_error(xs: &[f64], w: &[f64], degree: u32) -> f64 {
    (0..=degree)
        .map(|i| {
            let m: f64 = xs.iter().zip(w).map(|(x, w)| w * x.powi(i as i32)).sum();
            (m - gaussian_moment_1d(i)).abs()
        })
        .fold(0.0, f64::max)
}

/// Newton-style cleanup of the simplex output: repeatedly applies the
/// minimum-norm correction to the variables off their floor so that the
/// monomial moment residual vanishes to working precision.
fn refine(mu: &mut [f64], xs: &[f64], w0: &[f64], degree: u32, floor: f64) {
    let free: Vec<usize> = (0..mu.len()).filter(|&j| mu[j] > floor + ACTIVE_MARGIN && w0[j] > 0.0).collect();
    if free.is_empty() {
        return;
    }
    let m = degree as usize + 1;
    let a = DMatrix::from_fn(m, free.len(), |i, c| {
        let j = free[c];
        w0[j] * xs[j].powi(i as i32)
    });
    let svd = a.clone().svd(true, true);
    for _ in 0..REFINE_ROUNDS {
        let r = DVector::from_fn(m, |i, _| {
            let got: f64 = xs.iter().zip(w0).zip(mu.iter()).map(|((x, w), u)| w * u * x.powi(i as i32)).sum();
            gaussian_moment_1d(i as u32) - got
        });
        if r.amax() < 1e-15 {
            break;
        }
        let Ok(delta) = svd.solve(&r, 1e-14) else { break };
        let mut trial = mu.to_vec();
        for (c, &j) in free.iter().enumerate() {
            trial[j] += delta[c];
        }
        if trial.iter().any(|&u| u < floor - FLOOR_TOL) {
            break;
        }
        mu.copy_from_slice(&trial);
    }
}

/// Solves the Farkas dual `min yᵀ(b − floor·A1)` over `Aᵀy ≥ 0`, `y ∈ [−1, 1]`
/// and describes the resulting polynomial.
fn dual_certificate(a: &[Vec<f64>], floor: f64) -> String {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let b: Vec<f64> = (0..m).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    let a1: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let ys: Vec<_> = (0..m).map(|i| lp.add_var(b[i] - floor * a1[i], (-1.0, 1.0))).collect();
    for j in 0..n {
        let expr: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (y, a[i][j])).collect();
        lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    match lp.solve() {
        Ok(sol) if sol.objective() < 0.0 => {
            let coeffs: Vec<f64> = ys.iter().map(|&y| sol[y]).collect();
            let e_n = coeffs[0];
            let e_d0: f64 = coeffs.iter().zip(&a1).map(|(c, s)| c * s).sum();
            format!(
                "p = Σ cᵢ·hᵢ with c = {coeffs:?} (orthonormal Hermite basis) is ≥ 0 on the support, \
                 but E_N[p] = {e_n:.6e} < {floor}·E_D0[p] = {:.6e}",
                floor * e_d0
            )
        }
        _ => "primal reported infeasible; dual found no separating polynomial above solver tolerance".into(),
    }
}
