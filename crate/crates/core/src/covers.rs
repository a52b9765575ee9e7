//! Finite covers of candidate hypotheses: a lattice cover of the unit sphere
//! in the retrieved subspace, a threshold grid, and the filtered set of
//! intersections built from them.

use serde::{Deserialize, Serialize};

use crate::bits::BitSet;
use crate::concepts::HalfspaceIntersection;
use crate::error::{degenerate, Result, TdsError};
use crate::gaussian::binomial;
use crate::linalg::{dot, normalize, Labeled, OrthonormalBasis};

/// Default cap on the raw lattice size of a sphere cover.
pub const COVER_BUDGET: u128 = 10_000_000;

/// Default cap on the number of candidate intersections enumerated.
pub const CANDIDATE_BUDGET: u128 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereCover {
    pub points: Vec<Vec<f64>>,
    pub eps2: f64,
    pub source_basis: OrthonormalBasis,
    /// `(2⌊1/ε″⌋ + 1)^rank`, the lattice size before normalization.
    pub lattice_size: u128,
}

impl SphereCover {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// All normalized nonzero points `ε″ Σ jᵢ vⁱ` with integer `|jᵢ| ≤ 1/ε″`.
///
/// Integer vectors that are multiples of one another normalize to the same
/// point, so only primitive vectors (coordinate gcd 1) are kept, which makes
/// deduplication exact. Points come out in lexicographic order of `j`.
pub fn build_sphere_cover(basis: &OrthonormalBasis, eps2: f64, cap: u128) -> Result<SphereCover> {
    let rank = basis.rank();
    if rank == 0 {
        return Err(degenerate("sphere cover of a rank-0 subspace"));
    }
    if !(eps2 > 0.0 && eps2 < 1.0 / rank as f64) {
        return Err(degenerate(format!("ε″ = {eps2} outside (0, 1/{rank})")));
    }
    let span = (1.0 / eps2 + 1e-9).floor() as i64;
    let side = (2 * span + 1) as u128;
    let lattice_size = side.checked_pow(rank as u32).unwrap_or(u128::MAX);
    if lattice_size > cap {
        return Err(TdsError::BudgetExceeded {
            what: "sphere cover lattice".into(),
            count: lattice_size,
            cap,
        });
    }
    let mut j = vec![-span; rank];
    let mut points = Vec::new();
    loop {
        let g = j.iter().fold(0, |g, &x| gcd(g, x.unsigned_abs()));
        if g == 1 {
            let coeffs: Vec<f64> = j.iter().map(|&x| x as f64).collect();
            points.push(normalize(&basis.combine(&coeffs))?);
        }
        // Odometer increment, last coordinate fastest.
        let mut pos = rank;
        loop {
            if pos == 0 {
                return Ok(SphereCover {
                    points,
                    eps2,
                    source_basis: basis.clone(),
                    lattice_size,
                });
            }
            pos -= 1;
            if j[pos] < span {
                j[pos] += 1;
                break;
            }
            j[pos] = -span;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub values: Vec<f64>,
    pub eps1: f64,
    pub t: f64,
}

/// `{ jε′ : j ∈ ℤ, |jε′| ≤ T }`.
pub fn build_threshold_grid(eps1: f64, t: f64) -> Result<ThresholdGrid> {
    if !(eps1 > 0.0 && t > 0.0) {
        return Err(degenerate(format!("grid needs ε′ > 0 and T > 0, got {eps1}, {t}")));
    }
    let span = (t / eps1 + 1e-9).floor() as i64;
    let values = (-span..=span).map(|j| j as f64 * eps1).collect();
    Ok(ThresholdGrid { values, eps1, t })
}

/// Threshold choices for each cover direction.
#[derive(Debug, Clone, Copy)]
pub enum Thresholds<'a> {
    Homogeneous,
    Grid(&'a ThresholdGrid),
}

impl Thresholds<'_> {
    fn values(&self) -> &[f64] {
        match self {
            Thresholds::Homogeneous => &[0.0],
            Thresholds::Grid(g) => &g.values,
        }
    }
}

/// One halfspace `{x : u·x + θ ≥ 0}` of the cover product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub direction: usize,
    pub threshold_index: usize,
    pub normal: Vec<f64>,
    pub threshold: f64,
}

impl Atom {
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        dot(&self.normal, x) + self.threshold >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub members: Vec<HalfspaceIntersection>,
    /// For each member, its atoms as indices into `atoms`.
    pub member_atoms: Vec<Vec<usize>>,
    /// Atoms that survived pruning, in cover-major order.
    pub atoms: Vec<Atom>,
    pub train_errors: Vec<f64>,
    pub train_err_threshold: f64,
    /// Number of intersections of at most `k` atoms, before any filtering.
    pub enumerated: u128,
}

impl CandidateSet {
    /// Wraps explicit hypotheses, one atom per halfspace and zero recorded
    /// training error.
    pub fn from_members(members: Vec<HalfspaceIntersection>) -> Self {
        let mut atoms = Vec::new();
        let mut member_atoms = Vec::new();
        for c in &members {
            let mut ids = Vec::new();
            for (w, &t) in c.normals().iter().zip(c.thresholds()) {
                ids.push(atoms.len());
                atoms.push(Atom {
                    direction: atoms.len(),
                    threshold_index: 0,
                    normal: w.clone(),
                    threshold: t,
                });
            }
            member_atoms.push(ids);
        }
        let n = members.len();
        Self {
            members,
            member_atoms,
            atoms,
            train_errors: vec![0.0; n],
            train_err_threshold: 0.0,
            enumerated: n as u128,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index of the member with least training error; ties go to the
    /// earliest enumerated.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.train_errors.iter().enumerate() {
            if best.is_none_or(|b| *e < self.train_errors[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Largest error count `c` with `c / m ≤ thresh`.
pub(crate) fn max_count_within(thresh: f64, m: usize) -> usize {
    if thresh < 0.0 {
        return 0;
    }
    let mut c = ((thresh * m as f64).floor() as usize).min(m);
    while c < m && (c + 1) as f64 / m as f64 <= thresh {
        c += 1;
    }
    while c > 0 && c as f64 / m as f64 > thresh {
        c -= 1;
    }
    c
}

/// Every intersection of at most `k` distinct cover halfspaces whose
/// empirical training error is at most `err_thresh`.
///
/// Enumeration runs by size, then lexicographically over atom indices.
/// Adding a halfspace can only turn positives negative, so a partial
/// intersection whose false-negative count already exceeds the budget is
/// pruned together with all its extensions; this never drops a qualifying
/// candidate.
pub fn build_candidate_set(
    cover: &SphereCover,
    thresholds: Thresholds<'_>,
    k: usize,
    train: &Labeled,
    err_thresh: f64,
    budget: u128,
) -> Result<CandidateSet> {
    if cover.is_empty() {
        return Err(degenerate("candidate set from an empty cover"));
    }
    let theta = thresholds.values();
    let n_atoms = (cover.len() * theta.len()) as u64;
    let enumerated = (0..=k as u64).fold(0u128, |acc, s| acc.saturating_add(binomial(n_atoms, s)));
    if enumerated > budget {
        return Err(TdsError::BudgetExceeded {
            what: "candidate intersections".into(),
            count: enumerated,
            cap: budget,
        });
    }

    let m = train.len();
    if m == 0 {
        return Err(TdsError::InsufficientData("empty training set".into()));
    }
    let c_max = max_count_within(err_thresh, m);
    let pos_mask = BitSet::from_fn(m, |i| train.y[i] > 0);
    let n_pos = pos_mask.count_ones();

    let mut atoms = Vec::new();
    let mut masks = Vec::new();
    let mut atom_fn = Vec::new();
    for (di, u) in cover.points.iter().enumerate() {
        let proj = train.x.project(u);
        let mut pos_proj: Vec<f64> =
            proj.iter().zip(&train.y).filter(|(_, &y)| y > 0).map(|(p, _)| *p).collect();
        pos_proj.sort_by(f64::total_cmp);
        for (ti, &t) in theta.iter().enumerate() {
            let false_neg = pos_proj.partition_point(|&p| p + t < 0.0);
            if false_neg > c_max {
                continue;
            }
            masks.push(BitSet::from_fn(m, |i| proj[i] + t >= 0.0));
            atom_fn.push(false_neg);
            atoms.push(Atom { direction: di, threshold_index: ti, normal: u.clone(), threshold: t });
        }
    }

    let mut member_atoms: Vec<Vec<usize>> = Vec::new();
    let mut err_counts: Vec<usize> = Vec::new();
    if m - n_pos <= c_max {
        member_atoms.push(Vec::new());
        err_counts.push(m - n_pos);
    }
    let ctx = Dfs { masks: &masks, pos: &pos_mask, n_pos, c_max };
    for size in 1..=k.min(atoms.len()) {
        let mut chosen = Vec::with_capacity(size);
        for i in 0..atoms.len() {
            if size == 1 {
                let fp = masks[i].count_ones() - (n_pos - atom_fn[i]);
                if atom_fn[i] + fp <= c_max {
                    member_atoms.push(vec![i]);
                    err_counts.push(atom_fn[i] + fp);
                }
                continue;
            }
            chosen.push(i);
            ctx.extend(&masks[i], &mut chosen, size, &mut member_atoms, &mut err_counts);
            chosen.pop();
        }
    }
    if member_atoms.is_empty() {
        return Err(TdsError::EmptyCandidateSet);
    }

    let d = train.x.dim();
    let members = member_atoms
        .iter()
        .map(|ids| {
            let normals = ids.iter().map(|&a| atoms[a].normal.clone()).collect();
            let ts = ids.iter().map(|&a| atoms[a].threshold).collect();
            HalfspaceIntersection::new(d, normals, ts)
        })
        .collect::<Result<Vec<_>>>()?;
    let train_errors = err_counts.iter().map(|&c| c as f64 / m as f64).collect();
    Ok(CandidateSet {
        members,
        member_atoms,
        atoms,
        train_errors,
        train_err_threshold: err_thresh,
        enumerated,
    })
}

struct Dfs<'a> {
    masks: &'a [BitSet],
    pos: &'a BitSet,
    n_pos: usize,
    c_max: usize,
}

impl Dfs<'_> {
    fn extend(
        &self,
        acc: &BitSet,
        chosen: &mut Vec<usize>,
        size: usize,
        out: &mut Vec<Vec<usize>>,
        errs: &mut Vec<usize>,
    ) {
        let last = *chosen.last().expect("nonempty prefix");
        let final_level = chosen.len() + 1 == size;
        for j in last + 1..self.masks.len() {
            let (inside, inside_pos) = and_counts(acc, &self.masks[j], self.pos);
            let false_neg = self.n_pos - inside_pos;
            if false_neg > self.c_max {
                continue;
            }
            if final_level {
                let err = false_neg + inside - inside_pos;
                if err <= self.c_max {
                    chosen.push(j);
                    out.push(chosen.clone());
                    errs.push(err);
                    chosen.pop();
                }
            } else {
                chosen.push(j);
                self.extend(&acc.and(&self.masks[j]), chosen, size, out, errs);
                chosen.pop();
            }
        }
    }
}

fn and_counts(a: &BitSet, b: &BitSet, p: &BitSet) -> (usize, usize) {
    a.and_counts_with(b, p)
}
