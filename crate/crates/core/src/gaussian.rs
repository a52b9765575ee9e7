//! Standard Gaussian primitives: CDF and its inverse, exact moments,
//! multi-index enumeration, and seeded samplers.
//!
//! All randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) keyed by a
//! 64-bit seed and a stream id, so independent streams of one seed never
//! overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::concepts::HalfspaceIntersection;
use crate::error::{degenerate, Result, TdsError};
use crate::linalg::Samples;

/// Default cap on the number of enumerated multi-indices.
pub const MULTI_INDEX_CAP: u128 = 1_000_000;

/// Smallest region mass accepted by [`sample_truncated_gaussian`].
pub const MIN_TRUNCATION_MASS: f64 = 1e-4;

const PILOT_DRAWS: usize = 100_000;

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Φ(x), evaluated through `erfc` so the lower tail keeps full relative
/// precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Φ⁻¹(p) for `p ∈ (0, 1)`, by safeguarded Newton iteration.
pub fn std_normal_inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(degenerate(format!("inverse CDF needs p in (0,1), got {p}")));
    }
    if p > 0.5 {
        return Ok(-lower_inv_cdf(1.0 - p));
    }
    Ok(lower_inv_cdf(p))
}

// Solves Φ(x) = p for p ≤ 1/2, where the root is ≤ 0.
fn lower_inv_cdf(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    // Tail asymptotic as a starting point.
    let mut x = -(-2.0 * p.ln()).sqrt().max(0.1);
    x = x.clamp(lo, hi);
    for _ in 0..200 {
        let f = std_normal_cdf(x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = std_normal_pdf(x);
        let mut next = if dens > 0.0 { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

/// E[z^i] for z ~ N(0,1): zero for odd `i`, `(i-1)!!` for even `i`.
pub fn gaussian_moment_1d(i: u32) -> f64 {
    if i % 2 == 1 {
        return 0.0;
    }
    let mut m = 1.0;
    let mut j = i as i64 - 1;
    while j > 1 {
        m *= j as f64;
        j -= 2;
    }
    m
}

/// A multi-index α ∈ ℕ^d.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// x^α.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// E_{x~N_d}[x^α], the product of one-dimensional moments.
pub fn gaussian_moment_multi(alpha: &MultiIndex) -> f64 {
    alpha.0.iter().map(|&a| gaussian_moment_1d(a)).product()
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All α ∈ ℕ^d with |α| ≤ r, grouped by degree and in descending
/// lexicographic order within a degree: `(0,0), (1,0), (0,1), (2,0), …`.
pub fn enumerate_multi_indices(d: usize, r: u32, cap: u128) -> Result<Vec<MultiIndex>> {
    if d == 0 {
        return Err(degenerate("multi-indices need d ≥ 1"));
    }
    let count = binomial(d as u64 + r as u64, r as u64);
    if count > cap {
        return Err(TdsError::BudgetExceeded { what: "multi-indices".into(), count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; d];
    for deg in 0..=r {
        compositions(&mut cur, 0, deg, &mut out);
    }
    Ok(out)
}

fn compositions(cur: &mut [u32], pos: usize, left: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(MultiIndex(cur.to_vec()));
        cur[pos] = 0;
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        compositions(cur, pos + 1, left - a, out);
    }
    cur[pos] = 0;
}

/// Fixed stream ids used by the experiment harness.
pub mod streams {
    pub const TRUTH: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const TEST: u64 = 3;
    pub const HOLDOUT: u64 = 4;
    pub const SCENARIO: u64 = 5;
    pub const AUX: u64 = 6;
}

/// A reproducible source of randomness: the same `(seed, stream)` always
/// yields the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededSampler {
    pub seed: u64,
    pub stream: u64,
}

impl SeededSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A sampler on a derived stream, distinct for distinct tags.
    pub fn child(&self, tag: u64) -> Self {
        Self { seed: self.seed, stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(1))) }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_with_rng<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Samples {
    let data = (0..n * d).map(|_| standard_normal(rng)).collect();
    Samples::from_flat(d.max(1), data)
}

/// `n` i.i.d. draws from N_d.
pub fn sample_gaussian(d: usize, n: usize, s: &SeededSampler) -> Samples {
    gaussian_with_rng(&mut s.rng(), d, n)
}

/// `n` draws from N_d conditioned on `region`, by rejection. `max_tries`
/// bounds the total number of Gaussian draws.
pub fn sample_truncated_gaussian(
    region: &HalfspaceIntersection,
    n: usize,
    s: &SeededSampler,
    max_tries: usize,
) -> Result<Samples> {
    let d = region.dim();
    let mut rng = s.rng();
    let mut out = Samples::with_capacity(d, n);
    let mut x = vec![0.0; d];
    let mut draws = 0usize;
    while out.len() < n {
        if draws >= max_tries {
            return Err(TdsError::RegionTooThin(format!(
                "{} of {n} samples accepted after {draws} draws",
                out.len()
            )));
        }
        if draws == PILOT_DRAWS && (out.len() as f64) < MIN_TRUNCATION_MASS * draws as f64 {
            return Err(TdsError::RegionTooThin(format!(
                "pilot mass {} below {MIN_TRUNCATION_MASS}",
                out.len() as f64 / draws as f64
            )));
        }
        x.iter_mut().for_each(|xi| *xi = standard_normal(&mut rng));
        draws += 1;
        if region.contains(&x) {
            out.push(&x);
        }
    }
    Ok(out)
}
