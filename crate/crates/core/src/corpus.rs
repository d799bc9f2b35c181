//! Test-suite loading, text featurization, embedding reduction and
//! z-score standardization.
//!
//! A suite arrives as CSV (`id,outcome,f_<name>...` or `id,outcome,text`) or
//! JSON (`[{id, outcome, features: {name: value}} | {id, outcome, text}]`).
//! Outcome tokens map `fail` to [`OutcomeLabel::Effective`] and `pass` to
//! [`OutcomeLabel::Ineffective`]. Row numbers in errors are 1-based data rows
//! (the CSV header is not counted).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

pub const FEATURE_PREFIX: &str = "f_";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("missing column `{column}`{}", row.map(|r| format!(" in row {r}")).unwrap_or_default())]
    MissingColumn { column: String, row: Option<usize> },
    #[error("duplicate test id `{id}` in row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("empty test id in row {row}")]
    EmptyId { row: usize },
    #[error("non-numeric value `{value}` for feature `{column}` in row {row}")]
    NonNumericFeature {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite value for feature `{column}` in row {row}")]
    NonFiniteFeature { row: usize, column: String },
    #[error("unknown outcome token `{token}` in row {row} (expected pass, fail or unknown)")]
    UnknownOutcomeToken { row: usize, token: String },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("row {row} has {found} features, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("text featurization needs at least one test case")]
    EmptyCorpus,
    #[error("requested {k} components but 1 <= k <= {max} is required")]
    InvalidComponentCount { k: usize, max: usize },
    #[error("embeddings have no non-zero principal component")]
    RankDeficient,
    #[error("need at least {required} rows, got {n}")]
    TooFewRows { n: usize, required: usize },
    #[error("every feature column is constant")]
    AllColumnsConstant,
    #[error("embedding for `{0}` is missing")]
    MissingEmbedding(String),
    #[error("embedding id `{0}` does not belong to the suite")]
    UnknownEmbeddingId(String),
    #[error("embedding for `{id}` has length {found}, expected {expected}")]
    EmbeddingLength {
        id: String,
        found: usize,
        expected: usize,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Outcome of running one test case: the performance-space label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeLabel {
    /// Failing, bug-revealing test.
    Effective,
    /// Passing test.
    Ineffective,
    Unknown,
}

impl OutcomeLabel {
    pub fn token(self) -> &'static str {
        match self {
            OutcomeLabel::Effective => "fail",
            OutcomeLabel::Ineffective => "pass",
            OutcomeLabel::Unknown => "unknown",
        }
    }

    pub fn is_effective(self) -> bool {
        self == OutcomeLabel::Effective
    }

    /// Numeric encoding used by the projection: 1 for Effective, 0 otherwise.
    pub fn as_numeric(self) -> f64 {
        if self.is_effective() {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Accepts `pass`/`fail`/`unknown` and the oracle-pool synonyms
/// `unbiased`/`biased`, case-insensitively.
impl FromStr for OutcomeLabel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fail" | "biased" => Ok(OutcomeLabel::Effective),
            "pass" | "unbiased" => Ok(OutcomeLabel::Ineffective),
            "unknown" => Ok(OutcomeLabel::Unknown),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteFormat {
    Csv,
    Json,
}

impl FromStr for SuiteFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(SuiteFormat::Csv),
            "json" => Ok(SuiteFormat::Json),
            other => Err(format!("unknown suite format `{other}`")),
        }
    }
}

impl SuiteFormat {
    /// Guesses the format from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> SuiteFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => SuiteFormat::Json,
            _ => SuiteFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: String,
    pub raw_text: Option<String>,
    pub features: Vec<f64>,
    pub outcome: OutcomeLabel,
    /// Optional user-declared category, used for the Shannon index.
    pub category: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    cases: Vec<TestCase>,
    feature_names: Vec<String>,
}

impl TestSuite {
    pub fn new(cases: Vec<TestCase>, feature_names: Vec<String>) -> Result<Self> {
        check_unique_names(&feature_names)?;
        let mut seen = BTreeSet::new();
        for (i, case) in cases.iter().enumerate() {
            let row = i + 1;
            if case.id.is_empty() {
                return Err(CorpusError::EmptyId { row });
            }
            if !seen.insert(case.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: case.id.clone(),
                    row,
                });
            }
            if case.features.len() != feature_names.len() {
                return Err(CorpusError::RaggedRow {
                    row,
                    found: case.features.len(),
                    expected: feature_names.len(),
                });
            }
            if let Some(j) = case.features.iter().position(|x| !x.is_finite()) {
                return Err(CorpusError::NonFiniteFeature {
                    row,
                    column: feature_names[j].clone(),
                });
            }
        }
        Ok(TestSuite {
            cases,
            feature_names,
        })
    }

    pub fn cases(&self) -> &[TestCase] {
        &self.cases
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn outcomes(&self) -> Vec<OutcomeLabel> {
        self.cases.iter().map(|c| c.outcome).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.cases.iter().map(|c| c.id.as_str()).collect()
    }

    /// Categories of every case, if all cases declare one.
    pub fn categories(&self) -> Option<Vec<&str>> {
        self.cases.iter().map(|c| c.category.as_deref()).collect()
    }

    pub fn feature_matrix(&self) -> FeatureMatrix {
        let n = self.cases.len();
        let d = self.feature_names.len();
        let values = DMatrix::from_fn(n, d, |i, j| self.cases[i].features[j]);
        FeatureMatrix::from_parts(self.feature_names.clone(), values)
    }

    /// Appends the columns of `extra` (row-aligned with the suite).
    pub fn with_extra_features(mut self, extra: &FeatureMatrix) -> Result<Self> {
        if extra.n_rows() != self.len() {
            return Err(CorpusError::TooFewRows {
                n: extra.n_rows(),
                required: self.len(),
            });
        }
        let mut names = self.feature_names.clone();
        names.extend(extra.feature_names().iter().cloned());
        check_unique_names(&names)?;
        for (i, case) in self.cases.iter_mut().enumerate() {
            case.features.extend(extra.row(i));
        }
        self.feature_names = names;
        Ok(self)
    }

    /// Keeps the cases whose index satisfies `keep`.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize, &TestCase) -> bool) -> TestSuite {
        let cases = self
            .cases
            .iter()
            .enumerate()
            .filter(|(i, c)| keep(*i, c))
            .map(|(_, c)| c.clone())
            .collect();
        TestSuite {
            cases,
            feature_names: self.feature_names.clone(),
        }
    }
}

fn check_unique_names(names: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(CorpusError::DuplicateFeature(name.clone()));
        }
    }
    Ok(())
}

/// An `n × d` real matrix with named columns.
///
/// `column_means`/`column_stds` hold the statistics of the source columns:
/// for a raw matrix they describe the matrix itself, for a standardized one
/// they are the raw statistics the z-scores were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    values: DMatrix<f64>,
    column_means: Vec<f64>,
    column_stds: Vec<f64>,
    dropped_constant_columns: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        check_unique_names(&feature_names)?;
        if feature_names.len() != values.ncols() {
            return Err(CorpusError::RaggedRow {
                row: 0,
                found: values.ncols(),
                expected: feature_names.len(),
            });
        }
        for j in 0..values.ncols() {
            if let Some(i) = values.column(j).iter().position(|x| !x.is_finite()) {
                return Err(CorpusError::NonFiniteFeature {
                    row: i + 1,
                    column: feature_names[j].clone(),
                });
            }
        }
        Ok(Self::from_parts(feature_names, values))
    }

    fn from_parts(feature_names: Vec<String>, values: DMatrix<f64>) -> Self {
        let (column_means, column_stds) = if values.nrows() == 0 {
            (vec![0.0; values.ncols()], vec![0.0; values.ncols()])
        } else {
            let means = linalg::column_means(&values);
            let stds = linalg::column_stds(&values, &means);
            (means, stds)
        };
        FeatureMatrix {
            feature_names,
            values,
            column_means,
            column_stds,
            dropped_constant_columns: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_means(&self) -> &[f64] {
        &self.column_means
    }

    pub fn column_stds(&self) -> &[f64] {
        &self.column_stds
    }

    pub fn dropped_constant_columns(&self) -> &[String] {
        &self.dropped_constant_columns
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Sub-matrix with the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> FeatureMatrix {
        let values = self.values.select_columns(indices);
        FeatureMatrix {
            feature_names: indices.iter().map(|&j| self.feature_names[j].clone()).collect(),
            values,
            column_means: indices.iter().map(|&j| self.column_means[j]).collect(),
            column_stds: indices.iter().map(|&j| self.column_stds[j]).collect(),
            dropped_constant_columns: self.dropped_constant_columns.clone(),
        }
    }

    /// Sub-matrix with the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            values: self.values.select_rows(indices),
            column_means: self.column_means.clone(),
            column_stds: self.column_stds.clone(),
            dropped_constant_columns: self.dropped_constant_columns.clone(),
        }
    }
}

/// Configuration of the surface text features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TextFeatureConfig {
    /// Lowercase tokens before counting distinct types.
    pub case_insensitive_types: bool,
}

pub const TEXT_FEATURE_NAMES: [&str; 6] = [
    "char_length",
    "token_count",
    "type_token_ratio",
    "mean_token_length",
    "punctuation_density",
    "digit_density",
];

/// Surface features of text test cases, one row per case.
///
/// Tokens are whitespace separated. Lengths count Unicode scalar values.
/// Ratios over an empty denominator are 0.
pub fn featurize_text(cases: &[&str], config: TextFeatureConfig) -> Result<FeatureMatrix> {
    if cases.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut values = DMatrix::zeros(cases.len(), TEXT_FEATURE_NAMES.len());
    for (i, text) in cases.iter().enumerate() {
        for (j, v) in text_features(text, config).into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(FeatureMatrix::from_parts(
        TEXT_FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    ))
}

fn text_features(text: &str, config: TextFeatureConfig) -> [f64; 6] {
    let chars = text.chars().count();
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let types: BTreeSet<String> = tokens
        .iter()
        .map(|t| {
            if config.case_insensitive_types {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect();
    let token_chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let punct = text.chars().filter(|c| c.is_ascii_punctuation()).count();
    let digits = text.chars().filter(|c| c.is_ascii_digit()).count();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    [
        chars as f64,
        tokens.len() as f64,
        ratio(types.len(), tokens.len()),
        ratio(token_chars, tokens.len()),
        ratio(punct, chars),
        ratio(digits, chars),
    ]
}

/// Result of [`reduce_embeddings`].
#[derive(Debug, Clone)]
pub struct EmbeddingReduction {
    /// `n × k'` principal-component scores named `pc_1..pc_k'`.
    pub scores: FeatureMatrix,
    /// Variance explained by each returned component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// `m × k'` loadings; column `j` is component `j`.
    pub loadings: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Set when fewer than `k` non-zero components existed.
    pub rank_deficient: bool,
}

impl EmbeddingReduction {
    /// Maps scores back to the embedding space.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut out = self.scores.values() * self.loadings.transpose();
        for mut row in out.row_iter_mut() {
            for (x, mu) in row.iter_mut().zip(&self.mean) {
                *x += mu;
            }
        }
        out
    }
}

/// PCA of an `n × m` embedding matrix down to `k` components.
///
/// The covariance is `XᵀX / n` of the centered data, so the Gram matrix of
/// the scores has `n · λ` on its diagonal.
pub fn reduce_embeddings(embeddings: &DMatrix<f64>, k: usize) -> Result<EmbeddingReduction> {
    let (n, m) = embeddings.shape();
    let max = n.saturating_sub(1).min(m);
    if k == 0 || k > max {
        return Err(CorpusError::InvalidComponentCount { k, max });
    }
    if let Some(pos) = embeddings.iter().position(|x| !x.is_finite()) {
        return Err(CorpusError::NonFiniteFeature {
            row: pos % n + 1,
            column: format!("dim_{}", pos / n),
        });
    }
    let mean = linalg::column_means(embeddings);
    let mut centered = embeddings.clone();
    for mut row in centered.row_iter_mut() {
        for (x, mu) in row.iter_mut().zip(&mean) {
            *x -= mu;
        }
    }
    let axes = linalg::principal_axes(&linalg::covariance_of_centered(&centered));
    let top = axes.eigenvalues[0].max(0.0);
    let tol = top * (m as f64) * 1e-12;
    let available = axes
        .eigenvalues
        .iter()
        .take(k)
        .take_while(|&&l| l > tol && l > 0.0)
        .count();
    if available == 0 {
        return Err(CorpusError::RankDeficient);
    }
    let rank_deficient = available < k;
    if rank_deficient {
        log::warn!("embeddings support only {available} of {k} requested components");
    }
    let loadings = axes.vectors.columns(0, available).into_owned();
    let scores = &centered * &loadings;
    let names = (1..=available).map(|i| format!("pc_{i}")).collect();
    Ok(EmbeddingReduction {
        scores: FeatureMatrix::from_parts(names, scores),
        explained_variance: axes.eigenvalues[..available].to_vec(),
        loadings,
        mean,
        rank_deficient,
    })
}

/// Z-scores every column with the population standard deviation, dropping
/// zero-variance columns.
pub fn standardize(matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    let n = matrix.n_rows();
    if n < 2 {
        return Err(CorpusError::TooFewRows { n, required: 2 });
    }
    let means = linalg::column_means(&matrix.values);
    let stds = linalg::column_stds(&matrix.values, &means);
    let mut keep = Vec::new();
    let mut dropped = matrix.dropped_constant_columns.clone();
    for j in 0..matrix.n_features() {
        let max_abs = matrix.values.column(j).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if stds[j] <= 1e-12 * max_abs || stds[j] == 0.0 {
            dropped.push(matrix.feature_names[j].clone());
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(CorpusError::AllColumnsConstant);
    }
    let values = DMatrix::from_fn(n, keep.len(), |i, k| {
        let j = keep[k];
        (matrix.values[(i, j)] - means[j]) / stds[j]
    });
    Ok(FeatureMatrix {
        feature_names: keep.iter().map(|&j| matrix.feature_names[j].clone()).collect(),
        values,
        column_means: keep.iter().map(|&j| means[j]).collect(),
        column_stds: keep.iter().map(|&j| stds[j]).collect(),
        dropped_constant_columns: dropped,
    })
}

pub fn load_suite(path: &Path, format: SuiteFormat) -> Result<TestSuite> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        SuiteFormat::Csv => read_suite_csv(file),
        SuiteFormat::Json => {
            let mut text = String::new();
            std::io::BufReader::new(file)
                .read_to_string(&mut text)
                .map_err(|source| CorpusError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
            parse_suite_json(&text)
        }
    }
}

pub fn read_suite_csv<R: Read>(reader: R) -> Result<TestSuite> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Csv(e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let id_col = find("id").ok_or_else(|| missing("id"))?;
    let outcome_col = find("outcome").ok_or_else(|| missing("outcome"))?;
    let text_col = find("text");
    let category_col = find("category");
    let feature_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix(FEATURE_PREFIX)
                .filter(|name| !name.is_empty())
                .map(|name| (i, name.to_string()))
        })
        .collect();
    if feature_cols.is_empty() && text_col.is_none() {
        return Err(missing("f_<name> or text"));
    }

    let mut cases = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::Csv(format!("row {row}: {e}")))?;
        let field = |col: usize, name: &str| {
            record.get(col).ok_or_else(|| CorpusError::MissingColumn {
                column: name.to_string(),
                row: Some(row),
            })
        };
        let id = field(id_col, "id")?.trim().to_string();
        let token = field(outcome_col, "outcome")?;
        let outcome = token
            .parse()
            .map_err(|_| CorpusError::UnknownOutcomeToken {
                row,
                token: token.to_string(),
            })?;
        let mut features = Vec::with_capacity(feature_cols.len());
        for (col, name) in &feature_cols {
            let raw = field(*col, &format!("{FEATURE_PREFIX}{name}"))?;
            features.push(parse_feature(raw, row, name)?);
        }
        let raw_text = text_col
            .map(|c| field(c, "text").map(str::to_string))
            .transpose()?;
        let category = category_col
            .map(|c| field(c, "category").map(|s| s.trim().to_string()))
            .transpose()?;
        cases.push(TestCase {
            id,
            raw_text,
            features,
            outcome,
            category,
        });
    }
    let names = feature_cols.into_iter().map(|(_, n)| n).collect();
    finish_suite(cases, names)
}

fn missing(column: &str) -> CorpusError {
    CorpusError::MissingColumn {
        column: column.to_string(),
        row: None,
    }
}

fn parse_feature(raw: &str, row: usize, name: &str) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| CorpusError::NonNumericFeature {
        row,
        column: name.to_string(),
        value: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(CorpusError::NonFiniteFeature {
            row,
            column: name.to_string(),
        });
    }
    Ok(value)
}

/// Featurizes text when no numeric features were given, then validates.
fn finish_suite(mut cases: Vec<TestCase>, mut names: Vec<String>) -> Result<TestSuite> {
    if names.is_empty() {
        let texts: Vec<&str> = cases
            .iter()
            .map(|c| c.raw_text.as_deref().unwrap_or(""))
            .collect();
        let fm = featurize_text(&texts, TextFeatureConfig::default())?;
        for (i, case) in cases.iter_mut().enumerate() {
            case.features = fm.row(i);
        }
        names = fm.feature_names.clone();
    }
    TestSuite::new(cases, names)
}

pub fn parse_suite_json(text: &str) -> Result<TestSuite> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CorpusError::Json(e.to_string()))?;
    let items = value
        .as_array()
        .ok_or_else(|| CorpusError::Json("top-level value must be an array".into()))?;
    let mut names: Option<Vec<String>> = None;
    let mut cases = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let row = i + 1;
        let obj = item
            .as_object()
            .ok_or_else(|| CorpusError::Json(format!("row {row} is not an object")))?;
        let get_str = |key: &str| -> Result<Option<String>> {
            match obj.get(key) {
                None | Some(serde_json::Value::Null) => Ok(None),
                Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
                Some(other) => Ok(Some(other.to_string())),
            }
        };
        let id = get_str("id")?.ok_or_else(|| CorpusError::MissingColumn {
            column: "id".into(),
            row: Some(row),
        })?;
        let token = get_str("outcome")?.ok_or_else(|| CorpusError::MissingColumn {
            column: "outcome".into(),
            row: Some(row),
        })?;
        let outcome = token
            .parse()
            .map_err(|_| CorpusError::UnknownOutcomeToken { row, token })?;
        let raw_text = get_str("text")?;
        let category = get_str("category")?;
        let features = match obj.get("features") {
            Some(serde_json::Value::Object(map)) => {
                let row_names: Vec<String> = map.keys().cloned().collect();
                let expected = names.get_or_insert_with(|| row_names.clone());
                if let Some(name) = expected.iter().find(|n| !map.contains_key(*n)) {
                    return Err(CorpusError::MissingColumn {
                        column: name.clone(),
                        row: Some(row),
                    });
                }
                if row_names.len() != expected.len() {
                    return Err(CorpusError::RaggedRow {
                        row,
                        found: row_names.len(),
                        expected: expected.len(),
                    });
                }
                let mut out = Vec::with_capacity(expected.len());
                for name in expected.iter() {
                    match &map[name] {
                        serde_json::Value::Number(num) => {
                            let v = num.as_f64().unwrap_or(f64::NAN);
                            out.push(parse_feature(&v.to_string(), row, name).map(|_| v)?);
                        }
                        serde_json::Value::String(s) => out.push(parse_feature(s, row, name)?),
                        other => {
                            return Err(CorpusError::NonNumericFeature {
                                row,
                                column: name.clone(),
                                value: other.to_string(),
                            })
                        }
                    }
                }
                out
            }
            Some(other) => {
                return Err(CorpusError::Json(format!(
                    "row {row}: `features` must be an object, got {other}"
                )))
            }
            None => {
                if raw_text.is_none() {
                    return Err(CorpusError::MissingColumn {
                        column: "features or text".into(),
                        row: Some(row),
                    });
                }
                if names.as_ref().is_some_and(|n| !n.is_empty()) {
                    return Err(CorpusError::MissingColumn {
                        column: "features".into(),
                        row: Some(row),
                    });
                }
                names.get_or_insert_with(Vec::new);
                Vec::new()
            }
        };
        cases.push(TestCase {
            id,
            raw_text,
            features,
            outcome,
            category,
        });
    }
    finish_suite(cases, names.unwrap_or_default())
}

/// Writes a suite as CSV with columns `id,outcome[,category][,text],f_*`.
pub fn write_suite_csv<W: Write>(suite: &TestSuite, writer: W) -> Result<()> {
    let has_text = suite.cases.iter().any(|c| c.raw_text.is_some());
    let has_category = suite.cases.iter().any(|c| c.category.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| CorpusError::Csv(e.to_string());
    let mut header = vec!["id".to_string(), "outcome".to_string()];
    if has_category {
        header.push("category".into());
    }
    if has_text {
        header.push("text".into());
    }
    header.extend(suite.feature_names.iter().map(|n| format!("{FEATURE_PREFIX}{n}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for case in &suite.cases {
        let mut rec = vec![case.id.clone(), case.outcome.token().to_string()];
        if has_category {
            rec.push(case.category.clone().unwrap_or_default());
        }
        if has_text {
            rec.push(case.raw_text.clone().unwrap_or_default());
        }
        rec.extend(case.features.iter().map(|x| format!("{x:?}")));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| CorpusError::Csv(e.to_string()))
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: String,
    vector: Vec<f64>,
}

/// Reads embeddings JSONL (`{id, vector}` per line) aligned to the suite's
/// row order.
pub fn load_embeddings(path: &Path, suite: &TestSuite) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_embeddings_jsonl(&text, suite)
}

pub fn parse_embeddings_jsonl(text: &str, suite: &TestSuite) -> Result<DMatrix<f64>> {
    let index: BTreeMap<&str, usize> = suite
        .cases
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; suite.len()];
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: EmbeddingLine = serde_json::from_str(line)
            .map_err(|e| CorpusError::Json(format!("line {}: {e}", lineno + 1)))?;
        let &i = index
            .get(parsed.id.as_str())
            .ok_or_else(|| CorpusError::UnknownEmbeddingId(parsed.id.clone()))?;
        let expected = *dim.get_or_insert(parsed.vector.len());
        if parsed.vector.len() != expected {
            return Err(CorpusError::EmbeddingLength {
                id: parsed.id,
                found: parsed.vector.len(),
                expected,
            });
        }
        if rows[i].is_some() {
            return Err(CorpusError::DuplicateId {
                id: parsed.id,
                row: lineno + 1,
            });
        }
        rows[i] = Some(parsed.vector);
    }
    let m = dim.unwrap_or(0);
    let mut out = DMatrix::zeros(suite.len(), m);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| CorpusError::MissingEmbedding(suite.cases[i].id.clone()))?;
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}
