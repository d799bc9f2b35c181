//! Independent reference implementations. They share no code with the
//! crate and favour obviousness over speed.

#![allow(dead_code)]

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. Vectors are the columns of the returned matrix.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (values, vectors)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn strictly_between(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    let d = (b.0 - a.0) * (p.0 - a.0) + (b.1 - a.1) * (p.1 - a.1);
    d > 0.0 && d < (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)
}

/// Hull vertices by checking every ordered pair as a candidate edge: `(i, j)`
/// is an edge when every other point is strictly to its left or strictly
/// inside the segment. Returns vertices sorted lexicographically.
pub fn brute_force_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut vertices = Vec::new();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            let edge = (0..pts.len()).filter(|&k| k != i && k != j).all(|k| {
                let c = cross(pts[i], pts[j], pts[k]);
                c > 0.0 || (c == 0.0 && strictly_between(pts[i], pts[j], pts[k]))
            });
            if edge {
                vertices.push(pts[i]);
                vertices.push(pts[j]);
            }
        }
    }
    vertices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    vertices.dedup();
    vertices
}

/// Ray-casting point-in-polygon test (boundary points may go either way).
pub fn point_in_polygon(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Determinant by Laplace expansion along the first row.
pub fn cofactor_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    match n {
        0 => 1.0,
        1 => m[0][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][c] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// `H = −Σ pᵢ ln pᵢ` over the category frequencies.
pub fn shannon_reference(categories: &[u32]) -> f64 {
    let mut counts = std::collections::HashMap::new();
    for c in categories {
        *counts.entry(*c).or_insert(0usize) += 1;
    }
    let n = categories.len() as f64;
    -counts.values().map(|&k| k as f64 / n).map(|p| p * p.ln()).sum::<f64>()
}

/// Regularized mean logistic loss with the bias as the last parameter,
/// written from the textbook definition.
pub fn logistic_loss(params: &[f64], rows: &[Vec<f64>], labels: &[bool], l2: f64) -> f64 {
    let d = params.len() - 1;
    let mut total = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let z: f64 = (0..d).map(|j| params[j] * x[j]).sum::<f64>() + params[d];
        let p = 1.0 / (1.0 + (-z).exp());
        total += if y { -p.ln() } else { -(1.0 - p).ln() };
    }
    total / rows.len() as f64 + 0.5 * l2 * params[..d].iter().map(|w| w * w).sum::<f64>()
}

/// Central finite-difference gradient.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|j| {
            let mut up = at.to_vec();
            let mut down = at.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Ordinary least-squares R² of `target` on `design` plus an intercept,
/// via normal equations and Gaussian elimination.
pub fn ols_r2_reference(design: &[Vec<f64>], target: &[f64]) -> f64 {
    let n = target.len();
    let p = design[0].len() + 1;
    let row = |i: usize| -> Vec<f64> { std::iter::once(1.0).chain(design[i].iter().copied()).collect() };
    let mut a = vec![vec![0.0; p + 1]; p];
    for i in 0..n {
        let r = row(i);
        for j in 0..p {
            for k in 0..p {
                a[j][k] += r[j] * r[k];
            }
            a[j][p] += r[j] * target[i];
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in col..=p {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|j| a[j][p] / a[j][j]).collect();
    let mean = target.iter().sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in 0..n {
        let fit: f64 = row(i).iter().zip(&beta).map(|(x, b)| x * b).sum();
        ss_res += (target[i] - fit).powi(2);
        ss_tot += (target[i] - mean).powi(2);
    }
    1.0 - ss_res / ss_tot
}

/// True positive rate difference from explicit confusion counts.
pub fn eod_reference(pred: &[bool], truth: &[bool], in_first_group: &[bool]) -> f64 {
    let tpr = |g: bool| {
        let pos: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] && in_first_group[i] == g).collect();
        pos.iter().filter(|&&i| pred[i]).count() as f64 / pos.len() as f64
    };
    tpr(true) - tpr(false)
}
