//! Black-box diversity of a test suite: the Shannon index over test
//! categories and a determinant-based geometric diversity over a similarity
//! kernel.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum DiversityError {
    #[error("cannot compute diversity of an empty input")]
    EmptyInput,
    #[error("row {0} has zero norm and cannot be unit-normalized")]
    ZeroNormRow(usize),
    #[error("kernel is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("kernel is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("kernel is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = DiversityError> = std::result::Result<T, E>;

/// Shannon diversity of a categorical labelling, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShannonIndex {
    pub shannon_h: f64,
    pub richness_s: usize,
    /// `H / ln S`, or 1 when there is a single category.
    pub evenness_j: f64,
}

/// Log-determinant of a kernel; `Degenerate` stands for a singular kernel
/// (log-det of −∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDet {
    Finite(f64),
    Degenerate,
}

impl LogDet {
    pub fn value(self) -> f64 {
        match self {
            LogDet::Finite(v) => v,
            LogDet::Degenerate => f64::NEG_INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            LogDet::Finite(v) => Some(v),
            LogDet::Degenerate => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityScore {
    pub shannon_h: f64,
    pub richness_s: usize,
    pub evenness_j: f64,
    pub geometric_logdet: LogDet,
}

impl DiversityScore {
    pub fn new(shannon: ShannonIndex, geometric_logdet: LogDet) -> Self {
        DiversityScore {
            shannon_h: shannon.shannon_h,
            richness_s: shannon.richness_s,
            evenness_j: shannon.evenness_j,
            geometric_logdet,
        }
    }
}

/// Shannon index `H = −Σ pᵢ ln pᵢ` of the category proportions.
///
/// Counts are summed in ascending order so the result does not depend on
/// the order of the input or on the category names.
pub fn shannon_index<T: Ord>(categories: &[T]) -> Result<ShannonIndex> {
    if categories.is_empty() {
        return Err(DiversityError::EmptyInput);
    }
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for c in categories {
        *counts.entry(c).or_default() += 1;
    }
    Ok(shannon_from_counts(counts.into_values().collect()))
}

/// Shannon index from raw category counts (zero counts are ignored).
pub fn shannon_from_counts(mut counts: Vec<usize>) -> ShannonIndex {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let n: usize = counts.iter().sum();
    let s = counts.len();
    let h = if s <= 1 {
        0.0
    } else {
        let n = n as f64;
        -counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let h = h.max(0.0);
    let j = if s <= 1 { 1.0 } else { (h / (s as f64).ln()).clamp(0.0, 1.0) };
    ShannonIndex {
        shannon_h: h,
        richness_s: s,
        evenness_j: j,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    /// Gram matrix of unit-normalized rows (cosine similarity).
    Linear,
    Rbf { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
    kind: Option<KernelKind>,
    epsilon: f64,
}

impl KernelMatrix {
    /// Wraps an arbitrary kernel after checking symmetry (1e-12) and
    /// positive semidefiniteness (eigenvalues ≥ −1e-9).
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let (r, c) = values.shape();
        if r != c {
            return Err(DiversityError::NotSquare(r, c));
        }
        if r == 0 {
            return Err(DiversityError::EmptyInput);
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 {
                    return Err(DiversityError::NotSymmetric(i, j));
                }
            }
        }
        let min_eig = values.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-9 {
            return Err(DiversityError::NotPsd(min_eig));
        }
        Ok(KernelMatrix {
            values,
            kind: None,
            epsilon: 0.0,
        })
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// `None` for kernels supplied through [`KernelMatrix::from_values`].
    pub fn kind(&self) -> Option<KernelKind> {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Similarity kernel over the rows of `x`, plus `epsilon` on the diagonal.
pub fn build_kernel(x: &DMatrix<f64>, kind: KernelKind, epsilon: f64) -> Result<KernelMatrix> {
    let n = x.nrows();
    if n == 0 {
        return Err(DiversityError::EmptyInput);
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(DiversityError::InvalidParameter(format!("epsilon = {epsilon}")));
    }
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(n, n);
    match kind {
        KernelKind::Linear => {
            let mut unit = Vec::with_capacity(n);
            for (i, row) in rows.iter().enumerate() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(DiversityError::ZeroNormRow(i));
                }
                unit.push(row.iter().map(|v| v / norm).collect::<Vec<f64>>());
            }
            for i in 0..n {
                k[(i, i)] = 1.0;
                for j in (i + 1)..n {
                    let dot: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
                    k[(i, j)] = dot;
                    k[(j, i)] = dot;
                }
            }
        }
        KernelKind::Rbf { gamma } => {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return Err(DiversityError::InvalidParameter(format!("gamma = {gamma}")));
            }
            for i in 0..n {
                k[(i, i)] = 1.0;
                for j in (i + 1)..n {
                    let v = (-gamma * linalg::squared_distance(&rows[i], &rows[j])).exp();
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
        }
    }
    for i in 0..n {
        k[(i, i)] += epsilon;
    }
    Ok(KernelMatrix {
        values: k,
        kind: Some(kind),
        epsilon,
    })
}

const PIVOT_FLOOR: f64 = 1e-12;

/// Natural-log determinant of the kernel via Cholesky factorization. A pivot
/// at or below 1e-12 means the kernel is (numerically) singular, which
/// signals duplicate-like rows.
pub fn geometric_diversity(kernel: &KernelMatrix) -> LogDet {
    let a = &kernel.values;
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut logdet = 0.0;
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= PIVOT_FLOOR || !pivot.is_finite() {
            return LogDet::Degenerate;
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        logdet += pivot.ln();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    LogDet::Finite(logdet)
}

/// Cluster labels for rows of `x` by k-means with farthest-point seeding.
///
/// The first centre is row `seed mod n`; each further centre is the row
/// farthest from the chosen ones (lowest index on ties). Seeding stops early
/// when every row coincides with a centre. Lloyd iterations run until the
/// assignment is stable or 100 rounds have passed.
pub fn kmeans_labels(x: &DMatrix<f64>, k: usize, seed: u64) -> Vec<usize> {
    let n = x.nrows();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let first = (seed % n as u64) as usize;
    let mut centers = vec![rows[first].clone()];
    let mut nearest: Vec<f64> = rows
        .iter()
        .map(|r| linalg::squared_distance(r, &centers[0]))
        .collect();
    while centers.len() < k {
        let (best, dist) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if dist <= 0.0 {
            break;
        }
        centers.push(rows[best].clone());
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(linalg::squared_distance(r, &rows[best]));
        }
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        rows.iter()
            .map(|r| {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, center) in centers.iter().enumerate() {
                    let d = linalg::squared_distance(r, center);
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..100 {
        let d = x.ncols();
        let mut sums = vec![vec![0.0; d]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (r, &c) in rows.iter().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(r) {
                *s += v;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            if counts[c] > 0 {
                for (dst, s) in center.iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}
