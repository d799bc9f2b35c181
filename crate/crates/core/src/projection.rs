//! Linear projection of standardized features onto a 2D instance space.
//!
//! The map `Z = F·Aᵀ` is fitted by minimizing the joint reconstruction error
//! `‖F − Z·Bᵀ‖²_F + ‖y − Z·c‖²`: features and outcome should both be
//! linear trends across the plane. Fitting alternates an exact least-squares
//! solve for `(B, c)` with a backtracking gradient step on `A`, starting
//! from the top two principal axes of `F`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("projection needs at least 2 features, got {0}")]
    TooFewFeatures(usize),
    #[error("projection of {d} features needs at least {required} rows, got {n}")]
    TooFewRows { n: usize, d: usize, required: usize },
    #[error("outcome vector has {found} entries for {expected} rows")]
    LengthMismatch { found: usize, expected: usize },
    #[error("matrix has {found} columns, projection expects {expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("non-finite value in projection input")]
    NonFinite,
}

pub type Result<T, E = ProjectionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub max_iterations: usize,
    /// Relative objective change below which fitting stops.
    pub tolerance: f64,
    pub initial_step: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            max_iterations: 500,
            tolerance: 1e-8,
            initial_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `2 × d`; instance coordinates are `F·Aᵀ`.
    pub a_matrix: DMatrix<f64>,
    /// `d × 2` feature back-fit.
    pub b_matrix: DMatrix<f64>,
    /// Outcome back-fit.
    pub c_vector: [f64; 2],
    /// Objective after initialization and after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub trend_r2_features: Vec<f64>,
    pub trend_r2_outcome: f64,
    pub topo_spearman: f64,
    /// Set when `F` had principal rank below 2 and an axis-aligned start on
    /// the two most significant features was used instead.
    pub degenerate_init: bool,
    pub converged: bool,
}

impl Projection {
    pub fn dims(&self) -> usize {
        self.a_matrix.ncols()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    /// A bare projection with the given `A` and no fitted back-fit.
    pub fn from_matrix(a_matrix: DMatrix<f64>) -> Projection {
        let d = a_matrix.ncols();
        Projection {
            a_matrix,
            b_matrix: DMatrix::zeros(d, 2),
            c_vector: [0.0; 2],
            objective_trace: vec![f64::NAN],
            trend_r2_features: vec![0.0; d],
            trend_r2_outcome: 0.0,
            topo_spearman: 0.0,
            degenerate_init: false,
            converged: false,
        }
    }
}

/// Fits the projection. `fallback_order` lists feature indices from most to
/// least significant and is only used when `F` has principal rank below 2.
pub fn fit_projection(
    f: &DMatrix<f64>,
    y: &[f64],
    fallback_order: &[usize],
    config: ProjectionConfig,
) -> Result<Projection> {
    let (n, d) = f.shape();
    if d < 2 {
        return Err(ProjectionError::TooFewFeatures(d));
    }
    if n < d + 2 {
        return Err(ProjectionError::TooFewRows {
            n,
            d,
            required: d + 2,
        });
    }
    if y.len() != n {
        return Err(ProjectionError::LengthMismatch {
            found: y.len(),
            expected: n,
        });
    }
    if f.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(ProjectionError::NonFinite);
    }

    // targets: features followed by the outcome column
    let mut targets = DMatrix::zeros(n, d + 1);
    targets.columns_mut(0, d).copy_from(f);
    targets.set_column(d, &nalgebra::DVector::from_column_slice(y));

    let (mut a, degenerate_init) = initial_map(f, fallback_order);
    let mut w = back_fit(&(f * a.transpose()), &targets);
    let mut current = objective(f, &targets, &a, &w);
    let mut trace = vec![current];
    let mut converged = false;

    for _ in 0..config.max_iterations {
        let previous = current;

        // gradient step on A with the back-fit held fixed
        let z = f * a.transpose();
        let residual = &targets - &z * &w;
        let grad = (&w * residual.transpose() * f) * -2.0;
        let mut step = config.initial_step;
        while step >= f64::MIN_POSITIVE {
            let candidate = &a - &grad * step;
            let value = objective(f, &targets, &candidate, &w);
            if value < current {
                a = candidate;
                current = value;
                break;
            }
            step *= 0.5;
        }

        // exact back-fit for the new map
        let w_new = back_fit(&(f * a.transpose()), &targets);
        let value = objective(f, &targets, &a, &w_new);
        if value <= current {
            w = w_new;
            current = value;
        }
        debug_assert!(current <= previous);
        trace.push(current);

        if current == 0.0 || (previous - current) <= config.tolerance * previous {
            converged = true;
            break;
        }
    }

    let b_matrix = w.columns(0, d).transpose();
    let c_vector = [w[(0, d)], w[(1, d)]];
    let mut p = Projection {
        a_matrix: a,
        b_matrix,
        c_vector,
        objective_trace: trace,
        trend_r2_features: Vec::new(),
        trend_r2_outcome: 0.0,
        topo_spearman: 0.0,
        degenerate_init,
        converged,
    };
    let diag = trend_quality(&p, f, y)?;
    p.trend_r2_features = diag.trend_r2_features;
    p.trend_r2_outcome = diag.trend_r2_outcome;
    p.topo_spearman = diag.topo_spearman;
    Ok(p)
}

fn initial_map(f: &DMatrix<f64>, fallback_order: &[usize]) -> (DMatrix<f64>, bool) {
    let d = f.ncols();
    let axes = linalg::principal_axes(&linalg::covariance_of_centered(&centered(f)));
    let tol = axes.eigenvalues[0].max(0.0) * d as f64 * 1e-12;
    if axes.eigenvalues[1] > tol {
        return (axes.vectors.columns(0, 2).transpose(), false);
    }
    log::warn!("features have principal rank below 2; using an axis-aligned start");
    let mut order: Vec<usize> = fallback_order.iter().copied().filter(|&j| j < d).collect();
    for j in 0..d {
        if !order.contains(&j) {
            order.push(j);
        }
    }
    let mut a = DMatrix::zeros(2, d);
    a[(0, order[0])] = 1.0;
    a[(1, order[1])] = 1.0;
    (a, true)
}

fn centered(f: &DMatrix<f64>) -> DMatrix<f64> {
    let means = linalg::column_means(f);
    let mut out = f.clone();
    for mut row in out.row_iter_mut() {
        for (x, mu) in row.iter_mut().zip(&means) {
            *x -= mu;
        }
    }
    out
}

/// Least-squares `W` (2 × (d+1)) with `Z·W ≈ targets`.
fn back_fit(z: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::least_squares(z, targets)
}

fn objective(f: &DMatrix<f64>, targets: &DMatrix<f64>, a: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let z = f * a.transpose();
    (targets - z * w).norm_squared()
}

/// Objective value of an arbitrary map `A` with its optimal back-fit.
pub fn objective_for_map(f: &DMatrix<f64>, y: &[f64], a: &DMatrix<f64>) -> f64 {
    let d = f.ncols();
    let mut targets = DMatrix::zeros(f.nrows(), d + 1);
    targets.columns_mut(0, d).copy_from(f);
    targets.set_column(d, &nalgebra::DVector::from_column_slice(y));
    let w = back_fit(&(f * a.transpose()), &targets);
    objective(f, &targets, a, &w)
}

/// Instance coordinates `Z = F·Aᵀ`, one row per input row.
pub fn apply_projection(p: &Projection, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if f.ncols() != p.dims() {
        return Err(ProjectionError::DimensionMismatch {
            found: f.ncols(),
            expected: p.dims(),
        });
    }
    Ok(f * p.a_matrix.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendDiagnostics {
    pub trend_r2_features: Vec<f64>,
    pub trend_r2_outcome: f64,
    pub topo_spearman: f64,
}

/// Largest row count used for the pairwise-distance rank correlation.
pub const TOPOLOGY_SAMPLE: usize = 500;

/// R² of OLS fits (with intercept) of every feature and of the outcome on
/// the 2D coordinates, plus the Spearman correlation between pairwise
/// distances in feature space and in the plane. Above 500 rows every
/// `⌈n/500⌉`-th row is used for the distance correlation.
pub fn trend_quality(p: &Projection, f: &DMatrix<f64>, y: &[f64]) -> Result<TrendDiagnostics> {
    let z = apply_projection(p, f)?;
    let trend_r2_features = (0..f.ncols())
        .map(|j| {
            let col: Vec<f64> = f.column(j).iter().copied().collect();
            linalg::ols_r2(&z, &col)
        })
        .collect();
    let trend_r2_outcome = linalg::ols_r2(&z, y);

    let n = f.nrows();
    let stride = n.div_ceil(TOPOLOGY_SAMPLE).max(1);
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let mut high = Vec::new();
    let mut low = Vec::new();
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[a + 1..] {
            let fi: Vec<f64> = f.row(i).iter().copied().collect();
            let fj: Vec<f64> = f.row(j).iter().copied().collect();
            high.push(linalg::squared_distance(&fi, &fj).sqrt());
            let dz = ((z[(i, 0)] - z[(j, 0)]).powi(2) + (z[(i, 1)] - z[(j, 1)]).powi(2)).sqrt();
            low.push(dz);
        }
    }
    let topo_spearman = if high.len() < 2 { 0.0 } else { linalg::spearman(&high, &low) };
    Ok(TrendDiagnostics {
        trend_r2_features,
        trend_r2_outcome,
        topo_spearman,
    })
}
