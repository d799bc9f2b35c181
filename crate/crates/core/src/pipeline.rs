//! The end-to-end adequacy analysis: standardize → significance →
//! redundancy → selection → projection → boundary, producing an
//! [`InstanceSpaceModel`] that can then score any suite with the same
//! features.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CorpusError, OutcomeLabel, TestSuite};
use crate::diversity::{self, DiversityError, DiversityScore, KernelKind};
use crate::geometry::{self, GeometryConfig, GeometryError, InstanceSpace, Point, Polygon};
use crate::projection::{self, Projection, ProjectionConfig, ProjectionError};
use crate::report::{self, TisaReport};
use crate::selection::{self, FeatureSignificance, SelectedFeatures, SelectionConfig, SelectionError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("load stage: {0}")]
    Load(#[source] CorpusError),
    #[error("standardize stage: {0}")]
    Standardize(#[source] CorpusError),
    #[error("selection stage: {0}")]
    Selection(#[source] SelectionError),
    #[error("projection stage: {0}")]
    Projection(#[source] ProjectionError),
    #[error("boundary stage: {0}")]
    Boundary(#[source] GeometryError),
    #[error("metrics stage: {0}")]
    Metrics(#[source] GeometryError),
    #[error("diversity stage: {0}")]
    Diversity(#[source] DiversityError),
    #[error("metrics stage: suite lacks feature `{0}` used by the instance space")]
    MissingFeature(String),
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Load(_) => "load",
            PipelineError::Standardize(_) => "standardize",
            PipelineError::Selection(_) => "selection",
            PipelineError::Projection(_) => "projection",
            PipelineError::Boundary(_) => "boundary",
            PipelineError::Metrics(_) | PipelineError::MissingFeature(_) => "metrics",
            PipelineError::Diversity(_) => "diversity",
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub selection: SelectionConfig,
    pub redundancy_threshold: f64,
    pub projection: ProjectionConfig,
    pub geometry: GeometryConfig,
    pub kernel: KernelKind,
    pub epsilon: f64,
    /// k-means cluster count for Shannon categories when the suite has no
    /// `category` column.
    pub clusters: usize,
    /// Compute geometric diversity on the selected features only.
    pub diversity_on_selected: bool,
    pub histogram_bins: usize,
    /// Feature selection runs on at most this many labeled rows (every
    /// `⌈n/cap⌉`-th row when exceeded).
    pub selection_row_cap: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            selection: SelectionConfig::default(),
            redundancy_threshold: selection::DEFAULT_REDUNDANCY_THRESHOLD,
            projection: ProjectionConfig::default(),
            geometry: GeometryConfig::default(),
            kernel: KernelKind::Linear,
            epsilon: diversity::DEFAULT_EPSILON,
            clusters: 8,
            diversity_on_selected: false,
            histogram_bins: report::DEFAULT_BINS,
            selection_row_cap: 1000,
            seed: 0,
        }
    }
}

pub const WARN_PADDED_SELECTION: &str = "selection kept fewer than 2 features; padded by significance for the projection";
pub const WARN_DEGENERATE_INIT: &str = "features have principal rank below 2; projection started from feature axes";

/// A fitted instance space: how to standardize raw features, which ones
/// span the space, the projection and the boundary.
#[derive(Debug, Clone)]
pub struct InstanceSpaceModel {
    /// Non-constant feature names with their raw means and population stds.
    pub feature_names: Vec<String>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub dropped_constant_columns: Vec<String>,
    /// Indices into `feature_names` spanning the space, in selection order.
    pub selected: Vec<usize>,
    pub significance: FeatureSignificance,
    pub retained: Vec<usize>,
    pub selection: SelectedFeatures,
    pub projection: Projection,
    /// Observed standardized `[min, max]` per selected feature.
    pub feature_ranges: Vec<(f64, f64)>,
    pub boundary: Polygon,
    pub warnings: Vec<String>,
}

fn labeled_rows(outcomes: &[OutcomeLabel]) -> (Vec<usize>, Vec<bool>) {
    outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| **o != OutcomeLabel::Unknown)
        .map(|(i, o)| (i, o.is_effective()))
        .unzip()
}

impl InstanceSpaceModel {
    pub fn fit(suite: &TestSuite, config: &AnalysisConfig) -> Result<Self> {
        let raw = suite.feature_matrix();
        let z = corpus::standardize(&raw).map_err(PipelineError::Standardize)?;
        let names = z.feature_names().to_vec();
        let (rows, y) = labeled_rows(&suite.outcomes());
        let zl = z.values().select_rows(&rows);

        let significance = selection::feature_significance(&zl, &names, &y).map_err(PipelineError::Selection)?;
        let retained = selection::drop_redundant(&zl, &significance, config.redundancy_threshold)
            .map_err(PipelineError::Selection)?;
        let stride = rows.len().div_ceil(config.selection_row_cap.max(1)).max(1);
        let sample: Vec<usize> = (0..rows.len()).step_by(stride).collect();
        let zs = zl.select_rows(&sample);
        let ys: Vec<bool> = sample.iter().map(|&i| y[i]).collect();
        let chosen = selection::select_features(&zs, &ys, &significance, &retained, config.selection)
            .map_err(PipelineError::Selection)?;

        let mut warnings = Vec::new();
        let mut selected = chosen.indices.clone();
        if selected.len() < 2 {
            let by_rank = significance.order();
            let pad = by_rank
                .iter()
                .filter(|j| retained.contains(j))
                .chain(by_rank.iter())
                .copied();
            for j in pad {
                if selected.len() >= 2 {
                    break;
                }
                if !selected.contains(&j) {
                    selected.push(j);
                }
            }
            warnings.push(WARN_PADDED_SELECTION.to_string());
        }

        let f_all = z.values().select_columns(&selected);
        let f_fit = f_all.select_rows(&rows);
        let y_num: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut fallback: Vec<usize> = (0..selected.len()).collect();
        fallback.sort_by_key(|&k| significance.rank(selected[k]));
        let projection = projection::fit_projection(&f_fit, &y_num, &fallback, config.projection)
            .map_err(PipelineError::Projection)?;
        if projection.degenerate_init {
            warnings.push(WARN_DEGENERATE_INIT.to_string());
        }

        let feature_ranges: Vec<(f64, f64)> = (0..f_all.ncols())
            .map(|k| {
                let col = f_all.column(k);
                (col.min(), col.max())
            })
            .collect();
        let boundary = geometry::estimate_boundary(&projection.a_matrix, &feature_ranges, config.seed)
            .map_err(PipelineError::Boundary)?;

        Ok(InstanceSpaceModel {
            feature_names: names,
            feature_means: z.column_means().to_vec(),
            feature_stds: z.column_stds().to_vec(),
            dropped_constant_columns: z.dropped_constant_columns().to_vec(),
            selected,
            significance,
            retained,
            selection: chosen,
            projection,
            feature_ranges,
            boundary,
            warnings,
        })
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(|&j| self.feature_names[j].clone()).collect()
    }

    /// Standardizes the model's features of `suite` with the model's
    /// statistics. Columns follow `feature_names`.
    pub fn standardized(&self, suite: &TestSuite) -> Result<DMatrix<f64>> {
        let cols: Vec<usize> = self
            .feature_names
            .iter()
            .map(|name| {
                suite
                    .feature_names()
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| PipelineError::MissingFeature(name.clone()))
            })
            .collect::<Result<_>>()?;
        let cases = suite.cases();
        Ok(DMatrix::from_fn(cases.len(), cols.len(), |i, k| {
            (cases[i].features[cols[k]] - self.feature_means[k]) / self.feature_stds[k]
        }))
    }

    /// Places every test of `suite` in the plane.
    pub fn instance_space(&self, suite: &TestSuite) -> Result<InstanceSpace> {
        let z = self.standardized(suite)?;
        let f = z.select_columns(&self.selected);
        let coords = projection::apply_projection(&self.projection, &f).map_err(PipelineError::Projection)?;
        Ok(InstanceSpace {
            ids: suite.ids().into_iter().map(str::to_string).collect(),
            points: (0..coords.nrows()).map(|i| Point::new(coords[(i, 0)], coords[(i, 1)])).collect(),
            outcomes: suite.outcomes(),
        })
    }

    /// Scores `suite` in this instance space: the three areas, coverage,
    /// diversity and per-feature outcome histograms.
    pub fn evaluate(&self, suite: &TestSuite, config: &AnalysisConfig) -> Result<Evaluation> {
        let space = self.instance_space(suite)?;
        let metrics = geometry::space_metrics(&space, &self.boundary, config.geometry).map_err(PipelineError::Metrics)?;
        let z = self.standardized(suite)?;
        let diversity = suite_diversity(suite, &z, &self.selected, config)?;

        let selected_names = self.selected_names();
        let raw_columns: Vec<Vec<f64>> = selected_names
            .iter()
            .map(|name| {
                let j = suite
                    .feature_names()
                    .iter()
                    .position(|n| n == name)
                    .expect("standardized() checked every feature");
                suite.cases().iter().map(|c| c.features[j]).collect()
            })
            .collect();
        let histograms = report::feature_histograms(&selected_names, &raw_columns, &space.outcomes, config.histogram_bins);

        let mut warnings = self.warnings.clone();
        warnings.extend(metrics.warnings.iter().cloned());
        let outside = space.points.iter().filter(|p| !self.boundary.contains(**p, 1e-9)).count();
        if outside > 0 {
            warnings.push(format!("{outside} instances lie outside the boundary"));
        }
        let report = TisaReport {
            metrics,
            diversity,
            selected_features: selected_names,
            projection: self.projection.clone(),
            per_feature_distributions: histograms,
            warnings,
        };
        Ok(Evaluation { space, report })
    }

    pub fn to_file(&self) -> SpaceFile {
        let p = &self.projection;
        SpaceFile {
            feature_names: self.feature_names.clone(),
            feature_means: self.feature_means.clone(),
            feature_stds: self.feature_stds.clone(),
            selected: self.selected_names(),
            a_matrix: (0..2).map(|i| p.a_matrix.row(i).iter().copied().collect()).collect(),
            b_matrix: (0..p.b_matrix.nrows()).map(|j| [p.b_matrix[(j, 0)], p.b_matrix[(j, 1)]]).collect(),
            c_vector: p.c_vector,
            objective_trace: p.objective_trace.clone(),
            trend_r2_features: p.trend_r2_features.clone(),
            trend_r2_outcome: p.trend_r2_outcome,
            topo_spearman: p.topo_spearman,
            degenerate_init: p.degenerate_init,
            converged: p.converged,
            feature_ranges: self.feature_ranges.clone(),
            boundary: self.boundary.vertices().iter().map(|p| (p.x, p.y)).collect(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Shannon index over declared categories (or k-means clusters) and the
/// log-determinant diversity of the standardized features.
pub fn suite_diversity(
    suite: &TestSuite,
    standardized: &DMatrix<f64>,
    selected: &[usize],
    config: &AnalysisConfig,
) -> Result<DiversityScore> {
    let x = if config.diversity_on_selected {
        standardized.select_columns(selected)
    } else {
        standardized.clone()
    };
    let shannon = match suite.categories() {
        Some(cats) => diversity::shannon_index(&cats),
        None => {
            let labels = diversity::kmeans_labels(&x, config.clusters, config.seed);
            diversity::shannon_index(&labels)
        }
    }
    .map_err(PipelineError::Diversity)?;
    let kernel = diversity::build_kernel(&x, config.kernel, config.epsilon).map_err(PipelineError::Diversity)?;
    Ok(DiversityScore::new(shannon, diversity::geometric_diversity(&kernel)))
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub space: InstanceSpace,
    pub report: TisaReport,
}

/// Fits an instance space to `suite` and scores the suite in it.
pub fn analyze(suite: &TestSuite, config: &AnalysisConfig) -> Result<(InstanceSpaceModel, Evaluation)> {
    let model = InstanceSpaceModel::fit(suite, config)?;
    let eval = model.evaluate(suite, config)?;
    Ok((model, eval))
}

/// Serialized instance space (`space.json`), enough to score other suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub feature_names: Vec<String>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub selected: Vec<String>,
    #[serde(rename = "A")]
    pub a_matrix: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b_matrix: Vec<[f64; 2]>,
    #[serde(rename = "c")]
    pub c_vector: [f64; 2],
    pub objective_trace: Vec<f64>,
    pub trend_r2_features: Vec<f64>,
    pub trend_r2_outcome: f64,
    pub topo_spearman: f64,
    pub degenerate_init: bool,
    pub converged: bool,
    pub feature_ranges: Vec<(f64, f64)>,
    pub boundary: Vec<(f64, f64)>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SpaceFile {
    /// Rebuilds a model able to score suites. Selection diagnostics are not
    /// stored and come back empty.
    pub fn into_model(self) -> Result<InstanceSpaceModel> {
        let d = self.selected.len();
        let selected: Vec<usize> = self
            .selected
            .iter()
            .map(|s| {
                self.feature_names
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| PipelineError::MissingFeature(s.clone()))
            })
            .collect::<Result<_>>()?;
        if self.a_matrix.len() != 2
            || self.a_matrix.iter().any(|r| r.len() != d)
            || self.b_matrix.len() != d
            || self.objective_trace.is_empty()
        {
            return Err(PipelineError::Projection(ProjectionError::DimensionMismatch {
                found: self.a_matrix.first().map_or(0, Vec::len),
                expected: d,
            }));
        }
        let projection = Projection {
            a_matrix: DMatrix::from_fn(2, d, |i, j| self.a_matrix[i][j]),
            b_matrix: DMatrix::from_fn(d, 2, |j, k| self.b_matrix[j][k]),
            c_vector: self.c_vector,
            objective_trace: self.objective_trace,
            trend_r2_features: self.trend_r2_features,
            trend_r2_outcome: self.trend_r2_outcome,
            topo_spearman: self.topo_spearman,
            degenerate_init: self.degenerate_init,
            converged: self.converged,
        };
        let boundary = geometry::convex_hull(
            &self.boundary.iter().map(|&(x, y)| Point::new(x, y)).collect::<Vec<_>>(),
        )
        .map_err(PipelineError::Boundary)?;
        Ok(InstanceSpaceModel {
            feature_names: self.feature_names,
            feature_means: self.feature_means,
            feature_stds: self.feature_stds,
            dropped_constant_columns: Vec::new(),
            selected,
            significance: FeatureSignificance { features: Vec::new() },
            retained: Vec::new(),
            selection: SelectedFeatures {
                indices: Vec::new(),
                selection_trace: Vec::new(),
            },
            projection,
            feature_ranges: self.feature_ranges,
            boundary,
            warnings: self.warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn planted_suite_end_to_end() {
        let suite = fixtures::planted_cluster_suite(7);
        let (model, eval) = analyze(&suite, &AnalysisConfig::default()).unwrap();
        let names = model.selected_names();
        assert!(names.contains(&"1".to_string()) && names.contains(&"2".to_string()), "{names:?}");
        let r = &eval.report;
        assert!(r.coverage() > 0.0 && r.coverage() < 1.0);
        assert!(r.buggy_region_area() < r.instance_space_area());
        assert!(r.instance_space_area() <= r.boundary_area());
        assert!(eval.space.points.iter().all(|p| model.boundary.contains(*p, 1e-9)));
    }

    #[test]
    fn all_failing_suite_is_a_selection_error() {
        let suite = fixtures::planted_cluster_suite_sized(1, 40);
        let failing = suite.filter_rows(|_, c| c.outcome.is_effective());
        let err = analyze(&failing, &AnalysisConfig::default()).unwrap_err();
        assert_eq!(err.stage(), "selection");
    }

    #[test]
    fn space_file_round_trip_scores_identically() {
        let suite = fixtures::planted_cluster_suite_sized(3, 120);
        let config = AnalysisConfig::default();
        let (model, eval) = analyze(&suite, &config).unwrap();
        let text = serde_json::to_string(&model.to_file()).unwrap();
        let back: SpaceFile = serde_json::from_str(&text).unwrap();
        let restored = back.into_model().unwrap();
        let again = restored.evaluate(&suite, &config).unwrap();
        assert_eq!(again.space, eval.space);
        assert_eq!(again.report.to_json_string(), eval.report.to_json_string());
    }
}
