//! Feature selection: point-biserial significance, redundancy pruning and a
//! greedy forward wrapper around a 5-nearest-neighbour classifier.
//!
//! Outcome vectors here are `&[bool]` with `true` meaning Effective
//! (failing). Unknown outcomes must be filtered out by the caller.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("outcomes contain a single class; both effective and ineffective tests are required")]
    SingleClassOutcome,
    #[error("feature selection needs at least {required} rows, got {n}")]
    TooFewRows { n: usize, required: usize },
    #[error("maximum feature count must be at least 1")]
    InvalidK,
    #[error("redundancy threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("no candidate features to select from")]
    NoCandidates,
    #[error("outcome vector has {found} entries for {expected} rows")]
    LengthMismatch { found: usize, expected: usize },
}

pub type Result<T, E = SelectionError> = std::result::Result<T, E>;

pub const CV_FOLDS: usize = 5;
pub const NEIGHBOURS: usize = 5;
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub name: String,
    pub point_biserial_r: f64,
    /// 1-based rank by |r|, ties to the lower feature index.
    pub abs_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSignificance {
    pub features: Vec<FeatureScore>,
}

impl FeatureSignificance {
    pub fn rank(&self, j: usize) -> usize {
        self.features[j].abs_rank
    }

    /// Feature indices from most to least significant.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by_key(|&j| self.features[j].abs_rank);
        idx
    }
}

fn class_check(y: &[bool], n: usize) -> Result<()> {
    if y.len() != n {
        return Err(SelectionError::LengthMismatch {
            found: y.len(),
            expected: n,
        });
    }
    let fails = y.iter().filter(|&&b| b).count();
    if fails == 0 || fails == y.len() {
        return Err(SelectionError::SingleClassOutcome);
    }
    Ok(())
}

/// Point-biserial correlation of every column with the outcome:
/// `r = (mean_fail − mean_pass) / σ · √(p q)` with σ the population std.
pub fn feature_significance(
    x: &DMatrix<f64>,
    names: &[String],
    y: &[bool],
) -> Result<FeatureSignificance> {
    class_check(y, x.nrows())?;
    let n = y.len() as f64;
    let n_fail = y.iter().filter(|&&b| b).count() as f64;
    let p = n_fail / n;
    let q = 1.0 - p;
    let mut rs = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let sigma = linalg::pop_std(&col);
        let (mut sum_fail, mut sum_pass) = (0.0, 0.0);
        for (v, &fail) in col.iter().zip(y) {
            if fail {
                sum_fail += v;
            } else {
                sum_pass += v;
            }
        }
        let r = if sigma > 0.0 {
            let diff = sum_fail / n_fail - sum_pass / (n - n_fail);
            (diff / sigma * (p * q).sqrt()).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        rs.push(r);
    }
    let mut order: Vec<usize> = (0..rs.len()).collect();
    order.sort_by(|&a, &b| rs[b].abs().total_cmp(&rs[a].abs()).then(a.cmp(&b)));
    let mut ranks = vec![0; rs.len()];
    for (pos, &j) in order.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    Ok(FeatureSignificance {
        features: rs
            .into_iter()
            .enumerate()
            .map(|(j, r)| FeatureScore {
                name: names.get(j).cloned().unwrap_or_else(|| format!("feature_{j}")),
                point_biserial_r: r,
                abs_rank: ranks[j],
            })
            .collect(),
    })
}

pub const DEFAULT_REDUNDANCY_THRESHOLD: f64 = 0.95;

/// Drops the less significant member of every column pair whose absolute
/// Pearson correlation exceeds `threshold`. Columns are visited by
/// significance rank and kept when they are not redundant with any column
/// kept before them. Returns the kept indices in ascending order.
pub fn drop_redundant(
    x: &DMatrix<f64>,
    significance: &FeatureSignificance,
    threshold: f64,
) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(SelectionError::InvalidThreshold(threshold));
    }
    let cols: Vec<Vec<f64>> = (0..x.ncols())
        .map(|j| x.column(j).iter().copied().collect())
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    for j in significance.order() {
        let redundant = kept
            .iter()
            .any(|&k| linalg::pearson(&cols[j], &cols[k]).abs() > threshold);
        if !redundant {
            kept.push(j);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub max_features: usize,
    pub min_gain: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_features: 10,
            min_gain: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStep {
    pub feature: usize,
    pub balanced_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectedFeatures {
    /// Column indices in the order they were added.
    pub indices: Vec<usize>,
    pub selection_trace: Vec<SelectionStep>,
}

/// Greedy forward selection among `candidates`.
///
/// Each step adds the candidate maximizing the cross-validated balanced
/// accuracy of [`cv_balanced_accuracy`]; accuracy ties go to the more
/// significant feature, then the lower index. The first step always adds a
/// feature; later steps stop when the best gain is below `min_gain`.
pub fn select_features(
    x: &DMatrix<f64>,
    y: &[bool],
    significance: &FeatureSignificance,
    candidates: &[usize],
    config: SelectionConfig,
) -> Result<SelectedFeatures> {
    if config.max_features == 0 {
        return Err(SelectionError::InvalidK);
    }
    if x.nrows() < MIN_ROWS {
        return Err(SelectionError::TooFewRows {
            n: x.nrows(),
            required: MIN_ROWS,
        });
    }
    class_check(y, x.nrows())?;
    if candidates.is_empty() {
        return Err(SelectionError::NoCandidates);
    }
    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut current = f64::NEG_INFINITY;
    while chosen.len() < config.max_features {
        let mut best: Option<(usize, f64)> = None;
        for &j in candidates.iter().filter(|j| !chosen.contains(j)) {
            let mut cols = chosen.clone();
            cols.push(j);
            let acc = cv_balanced_accuracy(x, y, &cols);
            let better = match best {
                None => true,
                Some((b, best_acc)) => {
                    acc > best_acc
                        || (acc == best_acc
                            && (significance.rank(j), j) < (significance.rank(b), b))
                }
            };
            if better {
                best = Some((j, acc));
            }
        }
        let Some((j, acc)) = best else { break };
        if !chosen.is_empty() && acc - current < config.min_gain {
            break;
        }
        chosen.push(j);
        trace.push(SelectionStep {
            feature: j,
            balanced_accuracy: acc,
        });
        current = acc;
    }
    Ok(SelectedFeatures {
        indices: chosen,
        selection_trace: trace,
    })
}

/// Balanced accuracy of 5-NN majority vote under 5-fold cross-validation
/// with fold = row index mod 5, restricted to the columns `cols`.
/// Out-of-fold predictions are pooled before scoring. Distance ties go to
/// the lower row index.
pub fn cv_balanced_accuracy(x: &DMatrix<f64>, y: &[bool], cols: &[usize]) -> f64 {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| cols.iter().map(|&j| x[(i, j)]).collect())
        .collect();
    let mut predictions = vec![false; n];
    for fold in 0..CV_FOLDS {
        let train: Vec<usize> = (0..n).filter(|i| i % CV_FOLDS != fold).collect();
        for test in (fold..n).step_by(CV_FOLDS) {
            predictions[test] = knn_vote(&rows, y, &train, &rows[test]);
        }
    }
    balanced_accuracy(&predictions, y)
}

fn knn_vote(rows: &[Vec<f64>], y: &[bool], train: &[usize], query: &[f64]) -> bool {
    // (distance, row) pairs of the current k best, kept sorted
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(NEIGHBOURS + 1);
    for &i in train {
        let d = linalg::squared_distance(&rows[i], query);
        if best.len() == NEIGHBOURS {
            let worst = best[NEIGHBOURS - 1];
            if (d, i) >= worst {
                continue;
            }
            best.pop();
        }
        let pos = best.partition_point(|&(bd, bi)| (bd, bi) < (d, i));
        best.insert(pos, (d, i));
    }
    let votes = best.iter().filter(|&&(_, i)| y[i]).count();
    2 * votes > best.len()
}

/// Mean of the true-positive and true-negative rates. A class absent from
/// `truth` contributes nothing to the mean.
pub fn balanced_accuracy(pred: &[bool], truth: &[bool]) -> f64 {
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        if t {
            pos += 1;
            tp += p as usize;
        } else {
            neg += 1;
            tn += (!p) as usize;
        }
    }
    match (pos, neg) {
        (0, 0) => 0.0,
        (0, _) => tn as f64 / neg as f64,
        (_, 0) => tp as f64 / pos as f64,
        _ => 0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64),
    }
}
