//! Small dense linear-algebra and statistics helpers shared by the analysis
//! stages. Everything operates on `nalgebra::DMatrix<f64>` with a fixed
//! summation order so results are reproducible bit for bit.

use nalgebra::{DMatrix, DVector};

/// Column means of `m`.
pub fn column_means(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    (0..m.ncols())
        .map(|j| m.column(j).iter().sum::<f64>() / n)
        .collect()
}

/// Population standard deviation of every column.
pub fn column_stds(m: &DMatrix<f64>, means: &[f64]) -> Vec<f64> {
    let n = m.nrows() as f64;
    (0..m.ncols())
        .map(|j| {
            let mu = means[j];
            let ss: f64 = m.column(j).iter().map(|x| (x - mu) * (x - mu)).sum();
            (ss / n).sqrt()
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn pop_std(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Pearson correlation; zero when either input has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Ranks with ties replaced by their average (1-based).
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]).then(i.cmp(&j)));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start..end share the average of ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Least-squares solution of `x · coef ≈ rhs` via SVD, robust to rank loss.
pub fn least_squares(x: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    svd.solve(rhs, eps)
        .expect("SVD computed with both U and V^T")
}

/// Coefficient of determination of an OLS fit of `target` on the columns of
/// `design` plus an intercept. Zero-variance targets give 0.
pub fn ols_r2(design: &DMatrix<f64>, target: &[f64]) -> f64 {
    let n = design.nrows();
    let mu = mean(target);
    let sst: f64 = target.iter().map(|t| (t - mu) * (t - mu)).sum();
    if sst <= 0.0 {
        return 0.0;
    }
    let mut x = DMatrix::zeros(n, design.ncols() + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 0..design.ncols() {
            x[(i, j + 1)] = design[(i, j)];
        }
    }
    let y = DMatrix::from_column_slice(n, 1, target);
    let coef = least_squares(&x, &y);
    let fitted = &x * coef;
    let sse: f64 = (0..n).map(|i| (target[i] - fitted[(i, 0)]).powi(2)).sum();
    (1.0 - sse / sst).clamp(0.0, 1.0)
}

/// Eigen-decomposition of a symmetric positive semidefinite matrix with
/// eigenpairs sorted by non-increasing eigenvalue and each eigenvector's
/// sign fixed so that its largest-magnitude entry is positive.
pub struct PrincipalAxes {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the `k`-th eigenvector.
    pub vectors: DMatrix<f64>,
}

pub fn principal_axes(covariance: &DMatrix<f64>) -> PrincipalAxes {
    let eig = covariance.clone().symmetric_eigen();
    let d = covariance.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let mut vectors = DMatrix::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &src) in order.iter().enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        fix_sign(v.as_mut_slice());
        vectors.set_column(k, &v);
        eigenvalues.push(eig.eigenvalues[src]);
    }
    PrincipalAxes {
        eigenvalues,
        vectors,
    }
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `XᵀX / n` for an already centered matrix.
pub fn covariance_of_centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut c = x.transpose() * x;
    c /= n;
    // symmetrize away rounding asymmetry
    let d = c.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
