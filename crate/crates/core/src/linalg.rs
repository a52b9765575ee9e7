//! Dense vector and small-matrix primitives.
//!
//! Dimensions here are desk scale (d ≤ 64), so everything is plain `Vec<f64>`
//! with row-major storage. The symmetric eigensolver is delegated to
//! `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{degenerate, Result, TdsError};

/// Residual norm below which Gram–Schmidt treats a vector as dependent.
pub const GS_DROP_TOL: f64 = 1e-8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Unit vector along `a`.
pub fn normalize(a: &[f64]) -> Result<Vec<f64>> {
    let n = norm(a);
    if !(n > 0.0) || !n.is_finite() {
        return Err(degenerate("cannot normalize a zero or non-finite vector"));
    }
    Ok(scaled(a, 1.0 / n))
}

/// The `i`-th standard basis vector of R^d.
pub fn unit_vector(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// Angle between two nonzero vectors, in `[0, π]`.
pub fn angle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(degenerate(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(degenerate("angle with a zero vector"));
    }
    let c = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

/// An orthonormal family of vectors in R^dim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    /// Wraps vectors the caller guarantees are orthonormal to 1e-10.
    pub fn from_orthonormal(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(degenerate("basis vector has wrong dimension"));
            }
            for (j, u) in vectors.iter().enumerate().take(i + 1) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(u, v) - target).abs() > 1e-10 {
                    return Err(degenerate("vectors are not orthonormal"));
                }
            }
        }
        if vectors.len() > dim {
            return Err(degenerate("more basis vectors than dimensions"));
        }
        Ok(Self { dim, vectors })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, vectors: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Coordinates of `w` in this basis.
    pub fn coords(&self, w: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| dot(v, w)).collect()
    }

    /// Orthogonal projection of `w` onto the span.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for v in &self.vectors {
            axpy(dot(v, w), v, &mut out);
        }
        out
    }

    /// Vector with the given coordinates.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            axpy(*c, v, &mut out);
        }
        out
    }
}

/// `‖proj_B w‖₂` for a unit vector `w`.
pub fn project_residual_norm(w: &[f64], basis: &OrthonormalBasis) -> Result<f64> {
    if w.len() != basis.dim() {
        return Err(degenerate("dimension mismatch against basis"));
    }
    if (norm(w) - 1.0).abs() > 1e-8 {
        return Err(degenerate("w must be a unit vector"));
    }
    let s: f64 = basis.coords(w).iter().map(|c| c * c).sum();
    Ok(s.sqrt().min(1.0))
}

/// Modified Gram–Schmidt with re-orthogonalization. Vectors whose residual
/// norm relative to their original norm falls below [`GS_DROP_TOL`] are dropped.
pub fn orthonormalize(dim: usize, vs: &[Vec<f64>]) -> OrthonormalBasis {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        assert_eq!(v.len(), dim, "orthonormalize: dimension mismatch");
        let n0 = norm(v);
        if n0 == 0.0 || !n0.is_finite() {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        let nr = norm(&r);
        if nr / n0 < GS_DROP_TOL {
            continue;
        }
        out.push(scaled(&r, 1.0 / nr));
    }
    OrthonormalBasis { dim, vectors: out }
}

/// Completes `basis` to an orthonormal basis of R^dim, appending standard
/// basis directions in index order.
pub fn complete_basis(basis: &OrthonormalBasis) -> OrthonormalBasis {
    let dim = basis.dim();
    let mut vs = basis.vectors().to_vec();
    vs.extend((0..dim).map(|i| unit_vector(dim, i)));
    orthonormalize(dim, &vs)
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(degenerate("matrix is not square"));
            }
            data.extend_from_slice(r);
        }
        let m = Self { n, data };
        for i in 0..n {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-10 {
                    return Err(degenerate("matrix is not symmetric"));
                }
            }
        }
        Ok(m)
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|row| dot(row, v)).collect()
    }

    /// All eigenpairs, eigenvalues ascending. Each eigenvector's
    /// largest-magnitude coordinate is made positive.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        if n == 0 {
            return (Vec::new(), Vec::new());
        }
        let m = DMatrix::from_row_slice(n, n, &self.data);
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = order
            .iter()
            .map(|&i| {
                let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                fix_sign(&mut v);
                v
            })
            .collect();
        (values, vectors)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let (vals, _) = self.eigen();
        vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().0.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0.first().copied().unwrap_or(0.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        SymMatrix { n: self.n, data }
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` smallest eigenvalues (ascending) with their eigenvectors.
pub fn smallest_k_eigenpairs(m: &SymMatrix, k: usize) -> Result<(Vec<f64>, OrthonormalBasis)> {
    if k == 0 || k > m.n() {
        return Err(degenerate(format!("k = {k} outside 1..={}", m.n())));
    }
    let (mut vals, mut vecs) = m.eigen();
    vals.truncate(k);
    vecs.truncate(k);
    Ok((vals, OrthonormalBasis { dim: m.n(), vectors: vecs }))
}

/// An `n × d` row-major sample matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    d: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn new(d: usize) -> Self {
        Self { d, data: Vec::new() }
    }

    pub fn with_capacity(d: usize, n: usize) -> Self {
        Self { d, data: Vec::with_capacity(n * d) }
    }

    pub fn from_flat(d: usize, data: Vec<f64>) -> Self {
        assert!(d > 0 && data.len() % d == 0, "flat buffer is not a multiple of d");
        Self { d, data }
    }

    pub fn from_rows(d: usize, rows: &[Vec<f64>]) -> Self {
        let mut s = Self::with_capacity(d, rows.len());
        for r in rows {
            s.push(r);
        }
        s
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.d, "row has wrong dimension");
        self.data.extend_from_slice(row);
    }

    pub fn extend(&mut self, other: &Samples) {
        assert_eq!(self.d, other.d);
        self.data.extend_from_slice(&other.data);
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.data.len() / self.d
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn map_rows(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Samples {
        let mut data = vec![0.0; self.data.len()];
        for (src, dst) in self.rows().zip(data.chunks_exact_mut(self.d)) {
            f(src, dst);
        }
        Samples { d: self.d, data }
    }

    /// Rows whose index satisfies `keep`.
    pub fn select(&self, mut keep: impl FnMut(usize) -> bool) -> Samples {
        let mut out = Samples::new(self.d);
        for (i, r) in self.rows().enumerate() {
            if keep(i) {
                out.push(r);
            }
        }
        out
    }

    /// `u · x` for every row `x`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, u)).collect()
    }
}

/// Labelled training sample with ±1 labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labeled {
    pub x: Samples,
    pub y: Vec<i8>,
}

impl Labeled {
    pub fn new(x: Samples, y: Vec<i8>) -> Self {
        assert_eq!(x.len(), y.len(), "label count mismatch");
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn positives(&self) -> Samples {
        self.x.select(|i| self.y[i] > 0)
    }
}

/// Empirical mean and 1/n-normalized centered covariance.
pub fn empirical_mean_cov(points: &Samples) -> Result<(Vec<f64>, SymMatrix)> {
    let n = points.len();
    if n < 2 {
        return Err(TdsError::InsufficientData(format!(
            "covariance needs at least 2 points, got {n}"
        )));
    }
    let d = points.dim();
    let mut mean = vec![0.0; d];
    for r in points.rows() {
        axpy(1.0, r, &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut acc = vec![0.0; d * d];
    let mut c = vec![0.0; d];
    for r in points.rows() {
        for j in 0..d {
            c[j] = r[j] - mean[j];
        }
        for i in 0..d {
            let ci = c[i];
            let row = &mut acc[i * d..i * d + i + 1];
            for (a, cj) in row.iter_mut().zip(&c[..=i]) {
                *a += ci * cj;
            }
        }
    }
    let inv = 1.0 / n as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = acc[i * d + j] * inv;
            acc[i * d + j] = v;
            acc[j * d + i] = v;
        }
    }
    Ok((mean, SymMatrix { n: d, data: acc }))
}
