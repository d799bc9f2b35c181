//! A learned test oracle: regularized logistic regression trained on labels
//! obtained from a budgeted (simulated) teacher, with uncertainty sampling,
//! annotator-disagreement ranking and the equal opportunity difference.
//!
//! Labels are booleans: `true` is the positive class ("biased", or a failing
//! outcome when the loop is used as a correctness oracle).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("training labels contain a single class")]
    SingleClassLabels,
    #[error("no unlabeled instances left to query")]
    EmptyPool,
    #[error("pool of {0} instances is too small (at least 20 required)")]
    PoolTooSmall(usize),
    #[error("budget must be at least 1")]
    InvalidBudget,
    #[error("{what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        found: usize,
        expected: usize,
    },
    #[error("group `{0}` has no ground-truth positives")]
    NoPositivesInGroup(String),
    #[error("equal opportunity difference needs exactly 2 groups, found {0}")]
    GroupCount(usize),
    #[error("invalid annotation on line {line}: {message}")]
    Annotation { line: usize, message: String },
    #[error("cannot read annotations: {0}")]
    Io(String),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingParams {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Backtracking gives up on an epoch once the step falls below this.
    pub min_step: f64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            learning_rate: 0.1,
            l2: 0.01,
            epochs: 200,
            min_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias_term: f64,
    /// Training loss at initialization and after every accepted epoch.
    pub loss_history: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(d: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; d],
            bias_term: 0.0,
            loss_history: Vec::new(),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= 0.5
    }

    fn margin(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias_term
    }

    pub fn accuracy(&self, rows: &[&[f64]], labels: &[bool]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let hits = rows
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / rows.len() as f64
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `l2/2 · ‖w‖²` (the bias is not penalized).
pub fn loss(params: &[f64], rows: &[&[f64]], labels: &[bool], l2: f64) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    let n = rows.len() as f64;
    let data: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = w.iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>() + b[0];
            softplus(z) - if y { z } else { 0.0 }
        })
        .sum();
    data / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of [`loss`]; the last entry is the bias derivative.
pub fn gradient(params: &[f64], rows: &[&[f64]], labels: &[bool], l2: f64) -> Vec<f64> {
    let d = params.len() - 1;
    let (w, b) = params.split_at(d);
    let n = rows.len() as f64;
    let mut g = vec![0.0; d + 1];
    for (x, &y) in rows.iter().zip(labels) {
        let z = w.iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>() + b[0];
        let r = sigmoid(z) - if y { 1.0 } else { 0.0 };
        for (gj, xj) in g.iter_mut().zip(x.iter()) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    for (j, gj) in g.iter_mut().enumerate() {
        *gj /= n;
        if j < d {
            *gj += l2 * w[j];
        }
    }
    g
}

/// Full-batch gradient descent from zero. Each epoch starts at the learning
/// rate and halves the step until the loss decreases; training stops early
/// when no step above `min_step` helps.
pub fn train_classifier(rows: &[&[f64]], labels: &[bool], params: TrainingParams) -> Result<LogisticModel> {
    if rows.len() != labels.len() {
        return Err(OracleError::LengthMismatch {
            what: "labels",
            found: labels.len(),
            expected: rows.len(),
        });
    }
    if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
        return Err(OracleError::SingleClassLabels);
    }
    let d = rows[0].len();
    let mut theta = vec![0.0; d + 1];
    let mut current = loss(&theta, rows, labels, params.l2);
    let mut history = vec![current];
    'epochs: for _ in 0..params.epochs {
        let g = gradient(&theta, rows, labels, params.l2);
        let mut step = params.learning_rate;
        loop {
            let candidate: Vec<f64> = theta.iter().zip(&g).map(|(t, gj)| t - step * gj).collect();
            let value = loss(&candidate, rows, labels, params.l2);
            if value < current {
                theta = candidate;
                current = value;
                history.push(current);
                break;
            }
            step *= 0.5;
            if step < params.min_step {
                break 'epochs;
            }
        }
    }
    let bias_term = theta.pop().expect("bias entry");
    Ok(LogisticModel {
        weights: theta,
        bias_term,
        loss_history: history,
    })
}

/// Position of the probability closest to 0.5 (first one on ties).
pub fn most_uncertain(probabilities: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in probabilities.iter().enumerate() {
        let gap = (p - 0.5).abs();
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((i, gap));
        }
    }
    best.map(|(i, _)| i)
}

/// Position in `pool` of the instance the model is least sure about.
pub fn uncertainty_query(model: &LogisticModel, pool: &[&[f64]]) -> Result<usize> {
    let probs: Vec<f64> = pool.iter().map(|x| model.predict_proba(x)).collect();
    most_uncertain(&probs).ok_or(OracleError::EmptyPool)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryStrategy {
    Uncertainty,
    Random,
}

impl FromStr for QueryStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uncertainty" => Ok(QueryStrategy::Uncertainty),
            "random" => Ok(QueryStrategy::Random),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

impl fmt::Display for QueryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryStrategy::Uncertainty => "uncertainty",
            QueryStrategy::Random => "random",
        })
    }
}

/// Knuth's MMIX linear congruential generator.
#[derive(Debug, Clone)]
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self
            .0
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (self.0 >> 33) as u32
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.next_u32() as usize % n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveLearningConfig {
    pub budget: usize,
    pub seed_size: usize,
    pub strategy: QueryStrategy,
    pub heldout_fraction: f64,
    pub seed: u64,
    pub training: TrainingParams,
}

impl ActiveLearningConfig {
    pub fn new(budget: usize, strategy: QueryStrategy) -> Self {
        ActiveLearningConfig {
            budget,
            seed_size: 10,
            strategy,
            heldout_fraction: 0.3,
            seed: 0,
            training: TrainingParams::default(),
        }
    }

    fn heldout_stride(&self) -> usize {
        ((1.0 / self.heldout_fraction).floor() as usize).max(1)
    }
}

pub const MIN_POOL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub queries_used: usize,
    pub labeled: usize,
    pub heldout_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSession {
    pub strategy: QueryStrategy,
    pub budget: usize,
    /// Pool indices held out for evaluation.
    pub heldout_ids: Vec<usize>,
    /// Training-pool indices the teacher has labeled (seed set included), ascending.
    pub labeled_ids: Vec<usize>,
    pub unlabeled_ids: Vec<usize>,
    pub query_log: Vec<(usize, bool)>,
    pub curve: Vec<CurvePoint>,
    pub model: LogisticModel,
}

/// Deterministic held-out / training split: every `⌊1/f⌋`-th index (the
/// last of each stride) is held out.
pub fn split_pool(n: usize, config: &ActiveLearningConfig) -> (Vec<usize>, Vec<usize>) {
    let stride = config.heldout_stride();
    if stride <= 1 {
        // a fraction of 1 or more would leave nothing to train on
        return (Vec::new(), (0..n).collect());
    }
    (0..n).partition(|i| i % stride == stride - 1)
}

fn rows_of<'a>(x: &'a [Vec<f64>], ids: &[usize]) -> Vec<&'a [f64]> {
    ids.iter().map(|&i| x[i].as_slice()).collect()
}

fn labels_of(y: &[bool], ids: &[usize]) -> Vec<bool> {
    ids.iter().map(|&i| y[i]).collect()
}

/// Trains on every training-pool instance: the reference the loop is
/// compared against.
pub fn full_data_model(x: &DMatrix<f64>, y: &[bool], config: &ActiveLearningConfig) -> Result<(LogisticModel, f64)> {
    let rows = matrix_rows(x);
    let (heldout, training) = split_pool(rows.len(), config);
    let model = train_classifier(&rows_of(&rows, &training), &labels_of(y, &training), config.training)?;
    let acc = model.accuracy(&rows_of(&rows, &heldout), &labels_of(y, &heldout));
    Ok((model, acc))
}

fn matrix_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs the train → query → label loop against a teacher that answers from
/// the ground truth `y`. The seed set is the first `⌈s/2⌉` training indices
/// of each class; models are always trained on labeled instances in
/// ascending pool order.
pub fn simulate_active_learning(x: &DMatrix<f64>, y: &[bool], config: &ActiveLearningConfig) -> Result<OracleSession> {
    let n = x.nrows();
    if y.len() != n {
        return Err(OracleError::LengthMismatch {
            what: "labels",
            found: y.len(),
            expected: n,
        });
    }
    if n < MIN_POOL {
        return Err(OracleError::PoolTooSmall(n));
    }
    if config.budget == 0 {
        return Err(OracleError::InvalidBudget);
    }
    let rows = matrix_rows(x);
    let (heldout, training) = split_pool(n, config);
    let per_class = config.seed_size.div_ceil(2);
    let mut labeled: Vec<usize> = Vec::new();
    for class in [true, false] {
        labeled.extend(training.iter().copied().filter(|&i| y[i] == class).take(per_class));
    }
    labeled.sort_unstable();
    let mut unlabeled: Vec<usize> = training.iter().copied().filter(|i| !labeled.contains(i)).collect();

    let heldout_rows = rows_of(&rows, &heldout);
    let heldout_labels = labels_of(y, &heldout);
    let train = |ids: &[usize]| train_classifier(&rows_of(&rows, ids), &labels_of(y, ids), config.training);

    let mut model = train(&labeled)?;
    let mut curve = vec![CurvePoint {
        queries_used: 0,
        labeled: labeled.len(),
        heldout_accuracy: model.accuracy(&heldout_rows, &heldout_labels),
    }];
    let mut query_log = Vec::new();
    let mut lcg = Lcg::new(config.seed);
    while query_log.len() < config.budget && !unlabeled.is_empty() {
        let pos = match config.strategy {
            QueryStrategy::Uncertainty => uncertainty_query(&model, &rows_of(&rows, &unlabeled))?,
            QueryStrategy::Random => lcg.below(unlabeled.len()),
        };
        let id = unlabeled.remove(pos);
        let answer = y[id];
        query_log.push((id, answer));
        let at = labeled.partition_point(|&i| i < id);
        labeled.insert(at, id);
        model = train(&labeled)?;
        curve.push(CurvePoint {
            queries_used: query_log.len(),
            labeled: labeled.len(),
            heldout_accuracy: model.accuracy(&heldout_rows, &heldout_labels),
        });
    }
    Ok(OracleSession {
        strategy: config.strategy,
        budget: config.budget,
        heldout_ids: heldout,
        labeled_ids: labeled,
        unlabeled_ids: unlabeled,
        query_log,
        curve,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasLabel {
    Biased,
    Unbiased,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: String,
    pub annotator: String,
    pub label: BiasLabel,
}

/// Labels from several annotators per test case.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    cases: BTreeMap<String, Vec<(String, BiasLabel)>>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: impl Into<String>, annotator: impl Into<String>, label: BiasLabel) {
        self.cases.entry(id.into()).or_default().push((annotator.into(), label));
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn labels(&self, id: &str) -> Option<&[(String, BiasLabel)]> {
        self.cases.get(id).map(Vec::as_slice)
    }

    /// Binary entropy (nats) of the biased fraction among a case's labels.
    pub fn disagreement(&self, id: &str) -> Option<f64> {
        let labels = self.cases.get(id)?;
        let biased = labels.iter().filter(|(_, l)| *l == BiasLabel::Biased).count();
        Some(binary_entropy(biased as f64 / labels.len() as f64))
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut set = AnnotationSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let a: Annotation = serde_json::from_str(line).map_err(|e| OracleError::Annotation {
                line: i + 1,
                message: e.to_string(),
            })?;
            set.add(a.id, a.annotator, a.label);
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| OracleError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&text)
    }
}

/// `−p ln p − (1−p) ln(1−p)` with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// The `k` cases with the highest annotator disagreement, ties by id.
pub fn disagreement_ranking(annotations: &AnnotationSet, k: usize) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = annotations
        .cases
        .keys()
        .map(|id| (id.clone(), annotations.disagreement(id).unwrap_or(0.0)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// `TPR(A) − TPR(B)` where `A` is the smaller of the two group ids.
pub fn equal_opportunity_difference<G: Ord + fmt::Display>(
    predictions: &[bool],
    truth: &[bool],
    groups: &[G],
) -> Result<f64> {
    for (what, len) in [("predictions", predictions.len()), ("groups", groups.len())] {
        if len != truth.len() {
            return Err(OracleError::LengthMismatch {
                what,
                found: len,
                expected: truth.len(),
            });
        }
    }
    let mut table: BTreeMap<&G, (usize, usize)> = BTreeMap::new();
    for ((&p, &t), g) in predictions.iter().zip(truth).zip(groups) {
        let entry = table.entry(g).or_default();
        if t {
            entry.0 += 1;
            entry.1 += p as usize;
        }
    }
    if table.len() != 2 {
        return Err(OracleError::GroupCount(table.len()));
    }
    let mut tprs = Vec::with_capacity(2);
    for (g, (positives, hits)) in &table {
        if *positives == 0 {
            return Err(OracleError::NoPositivesInGroup(g.to_string()));
        }
        tprs.push(*hits as f64 / *positives as f64);
    }
    Ok(tprs[0] - tprs[1])
}
