use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Discrete1D;
use crate::error::{degenerate, Result, TdsError};
use crate::gaussian::{standard_normal, std_normal_cdf, std_normal_inv_cdf, SeededSampler};

/// A real-valued distribution that can be sampled.
pub trait Sampler1D {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

impl Sampler1D for Discrete1D {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Discrete1D::sample(self, rng)
    }
}

/// Standard Gaussian with the mass of `[0, τ]` moved to the point `t`.
///
/// `t = ln(1/ε)` and `Pr_{N(0,1)}[x ∈ [0, τ]] = 13ε`, so at least `13ε` of
/// the mass sits at or beyond `t` while the Gaussian itself puts almost
/// nothing there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelocatedGaussian {
    pub eps: f64,
    pub t: f64,
    pub tau: f64,
}

impl Sampler1D for RelocatedGaussian {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = standard_normal(rng);
        if (0.0..=self.tau).contains(&x) {
            self.t
        } else {
            x
        }
    }
}

impl RelocatedGaussian {
    /// Exact `Pr[z ≥ t]`: the relocated `13ε` plus the Gaussian tail beyond
    /// `t` (which does not overlap `[0, τ]` whenever `τ < t`).
    pub fn tail_mass(&self) -> f64 {
        let moved = std_normal_cdf(self.tau) - 0.5;
        let overlap = if self.tau >= self.t { std_normal_cdf(self.tau) - std_normal_cdf(self.t) } else { 0.0 };
        moved + std_normal_cdf(-self.t) - overlap
    }

    /// `E[z^i] − E_{N(0,1)}[z^i] = 13ε·tⁱ − ∫₀^τ xⁱ φ(x) dx`.
    pub fn moment_shift(&self, i: u32) -> f64 {
        let moved = std_normal_cdf(self.tau) - 0.5;
        moved * self.t.powi(i as i32) - truncated_moment(i, self.tau)
    }
}

// ∫₀^τ xⁱ φ(x) dx via the recursion Mᵢ = (i−1)Mᵢ₋₂ − τ^{i−1}φ(τ).
fn truncated_moment(i: u32, tau: f64) -> f64 {
    let phi = crate::gaussian::std_normal_pdf(tau);
    let m0 = std_normal_cdf(tau) - 0.5;
    let m1 = crate::gaussian::std_normal_pdf(0.0) - phi;
    match i {
        0 => m0,
        1 => m1,
        _ => {
            let (mut a, mut b) = (m0, m1);
            for j in 2..=i {
                let next = (j - 1) as f64 * a - tau.powi(j as i32 - 1) * phi;
                a = b;
                b = next;
            }
            b
        }
    }
}

/// The relocated Gaussian for accuracy `eps`; needs `13ε < 1/2`.
pub fn build_mass_relocated_1d(eps: f64) -> Result<RelocatedGaussian> {
    if !(eps > 0.0 && 13.0 * eps < 0.5) {
        return Err(degenerate(format!("ε = {eps} outside (0, 1/26)")));
    }
    let t = (1.0 / eps).ln();
    let tau = std_normal_inv_cdf(0.5 + 13.0 * eps)?;
    Ok(RelocatedGaussian { eps, t, tau })
}

/// `k₀ = ln(1/ε) / (100 ln ln(1/ε))`. Below 1 for every practical ε.
pub fn k0(eps: f64) -> f64 {
    let l = (1.0 / eps).ln();
    l / (100.0 * l.ln())
}

/// Empirical distribution of `k` i.i.d. draws.
pub fn discretize_1d<S: Sampler1D>(sampler: &S, k: usize, s: &SeededSampler) -> Result<Discrete1D> {
    if k == 0 {
        return Err(degenerate("discretization needs K ≥ 1"));
    }
    let mut rng = s.rng();
    Discrete1D::empirical((0..k).map(|_| sampler.sample(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstance1D {
    pub dist: Discrete1D,
    pub t: f64,
    pub eps: f64,
    /// The real-valued `k₀`; moments are compared up to `⌊10k₀⌋`.
    pub k0: f64,
    pub matched_degree: u32,
    pub tail_mass: f64,
    pub max_moment_error: f64,
    /// `k₀^{−10k₀}`, the allowed moment error.
    pub moment_bound: f64,
    /// Number of draws in the accepted discretization.
    pub draws: usize,
}

/// Discretizes the relocated Gaussian, doubling the number of draws from
/// `k_start` up to `k_cap` until the tail mass is at least `12ε` and the
/// moments up to `⌊10k₀⌋` are within `k₀^{−10k₀}` of Gaussian.
pub fn build_hard_instance(
    eps: f64,
    k_start: usize,
    k_cap: usize,
    s: &SeededSampler,
) -> Result<HardInstance1D> {
    let reloc = build_mass_relocated_1d(eps)?;
    let k0 = k0(eps);
    let matched_degree = (10.0 * k0).floor().max(0.0) as u32;
    let moment_bound = k0.powf(-10.0 * k0);
    let mut k = k_start.max(1);
    let mut attempt = 0;
    while k <= k_cap {
        let dist = discretize_1d(&reloc, k, &s.child(attempt))?;
        let tail_mass = dist.tail_mass(reloc.t);
        let max_moment_error = dist.max_moment_error(matched_degree);
        if tail_mass >= 12.0 * eps && max_moment_error <= moment_bound {
            return Ok(HardInstance1D {
                dist,
                t: reloc.t,
                eps,
                k0,
                matched_degree,
                tail_mass,
                max_moment_error,
                moment_bound,
                draws: k,
            });
        }
        k = k.saturating_mul(2);
        attempt += 1;
    }
    Err(TdsError::GenerationFailed(format!(
        "no discretization with K ≤ {k_cap} met the tail and moment checks"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relocation_parameters() {
        let r = build_mass_relocated_1d(0.01).unwrap();
        assert!((r.t - 100f64.ln()).abs() < 1e-12);
        assert!((std_normal_cdf(r.tau) - 0.63).abs() < 1e-12);
        assert!((r.tau - 0.3319).abs() < 1e-4);
        assert!(build_mass_relocated_1d(1.0 / 26.0).is_err());
    }

    #[test]
    fn truncated_moment_recursion_matches_quadrature() {
        let tau = 0.7;
        for i in 0..6 {
            let n = 20_000;
            let h = tau / n as f64;
            let simpson: f64 = (0..=n)
                .map(|j| {
                    let x = j as f64 * h;
                    let w = if j == 0 || j == n { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
                    w * x.powi(i) * crate::gaussian::std_normal_pdf(x)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((truncated_moment(i as u32, tau) - simpson).abs() < 1e-12, "i = {i}");
        }
    }

    struct Constant(f64);

    impl Sampler1D for Constant {
        fn sample<R: Rng + ?Sized>(&self, _: &mut R) -> f64 {
            self.0
        }
    }

    #[test]
    fn discretize_examples() {
        let s = SeededSampler::new(1, 0);
        let r = build_mass_relocated_1d(0.01).unwrap();
        assert_eq!(discretize_1d(&r, 1, &s).unwrap().len(), 1);
        let c = discretize_1d(&Constant(0.0), 50, &s).unwrap();
        assert_eq!((c.support(), c.weights()), (&[0.0][..], &[1.0][..]));
        assert!(discretize_1d(&r, 0, &s).is_err());
    }

    #[test]
    fn k0_is_below_one_at_desk_scale() {
        for eps in [0.1, 0.01, 1e-4, 1e-8] {
            assert!(k0(eps) < 1.0);
        }
    }
}
