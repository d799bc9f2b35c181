use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use instascope_core::corpus::{self, CorpusError, SuiteFormat, TestCase, TestSuite, TextFeatureConfig};
use instascope_core::diversity::DiversityScore;
use instascope_core::oracle::{self, ActiveLearningConfig, AnnotationSet, OracleError, OracleSession, QueryStrategy};
use instascope_core::pipeline::{self, AnalysisConfig, Evaluation, InstanceSpaceModel, PipelineError, SpaceFile};
use instascope_core::report::{self, sig9};
use instascope_core::{fixtures, KernelKind, OutcomeLabel};
use serde_json::json;

use crate::args::{
    AnalyzeArgs, Command, DiversityArgs, FormatArg, GeometryArgs, KernelArgs, MetricsArgs, OracleArgs, ProjectArgs,
    SpaceArgs, StrategyArg, SuiteArgs, SynthArgs, SynthKind,
};

/// A failed run: the pipeline stage it stopped in and why.
#[derive(Debug)]
pub struct Failure {
    stage: &'static str,
    message: String,
}

impl Failure {
    fn new(stage: &'static str, message: impl fmt::Display) -> Self {
        Failure {
            stage,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        2
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.message)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let stage = e.stage();
        // the pipeline's own message already leads with the stage
        let text = e.to_string();
        let prefix = format!("{stage} stage: ");
        Failure::new(stage, text.strip_prefix(&prefix).unwrap_or(&text))
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure::new("oracle", e)
    }
}

type Result<T> = std::result::Result<T, Failure>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze(args) => analyze(args),
        Command::Diversity(args) => diversity(args),
        Command::Project(args) => project(args),
        Command::Metrics(args) => metrics(args),
        Command::OracleSim(args) => oracle_sim(args),
        Command::Synth(args) => synth(args),
    }
}

fn suite_format(path: &Path, format: Option<FormatArg>) -> SuiteFormat {
    match format {
        Some(FormatArg::Csv) => SuiteFormat::Csv,
        Some(FormatArg::Json) => SuiteFormat::Json,
        None => SuiteFormat::from_path(path),
    }
}

fn load_error(e: CorpusError) -> Failure {
    Failure::from(PipelineError::Load(e))
}

fn load_suite(args: &SuiteArgs) -> Result<TestSuite> {
    let mut suite =
        corpus::load_suite(&args.input, suite_format(&args.input, args.format)).map_err(load_error)?;
    log::info!("loaded {} tests with {} features", suite.len(), suite.feature_names().len());
    // text-only suites arrive featurized already
    let has_text_features = corpus::TEXT_FEATURE_NAMES
        .iter()
        .all(|n| suite.feature_names().iter().any(|f| f == n));
    if args.text_features && !has_text_features {
        let texts: Vec<&str> = suite
            .cases()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.raw_text.as_deref().ok_or(CorpusError::MissingColumn {
                    column: "text".into(),
                    row: Some(i + 1),
                })
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(load_error)?;
        let extra = corpus::featurize_text(&texts, TextFeatureConfig::default()).map_err(load_error)?;
        suite = suite.with_extra_features(&extra).map_err(load_error)?;
    }
    if let Some(path) = &args.embeddings {
        let embeddings = corpus::load_embeddings(path, &suite).map_err(load_error)?;
        let reduced = corpus::reduce_embeddings(&embeddings, args.embedding_dims as usize).map_err(load_error)?;
        if reduced.rank_deficient {
            log::warn!("embeddings yield only {} components", reduced.scores.n_features());
        }
        suite = suite.with_extra_features(&reduced.scores).map_err(load_error)?;
    }
    Ok(suite)
}

fn kernel_kind(args: &KernelArgs, n_features: usize) -> KernelKind {
    match args.kernel {
        crate::args::KernelArg::Linear => KernelKind::Linear,
        crate::args::KernelArg::Rbf => KernelKind::Rbf {
            gamma: args.gamma.unwrap_or(1.0 / n_features.max(1) as f64),
        },
    }
}

fn analysis_config(
    space: Option<&SpaceArgs>,
    geometry: Option<&GeometryArgs>,
    kernel: &KernelArgs,
    seed: u64,
    n_features: usize,
) -> AnalysisConfig {
    let mut config = AnalysisConfig {
        seed,
        kernel: kernel_kind(kernel, n_features),
        epsilon: kernel.epsilon,
        clusters: kernel.clusters as usize,
        diversity_on_selected: kernel.diversity_on_selected,
        ..AnalysisConfig::default()
    };
    if let Some(s) = space {
        config.selection.max_features = s.features_k as usize;
        config.selection.min_gain = s.min_gain;
        config.redundancy_threshold = s.redundancy_threshold;
    }
    if let Some(g) = geometry {
        config.geometry.cells_per_axis = g.grid as usize;
        config.geometry.prune_outliers = g.prune_outliers;
        config.geometry.prune_neighbours = g.prune_neighbours as usize;
    }
    config
}

fn kernel_defaults() -> KernelArgs {
    KernelArgs {
        kernel: crate::args::KernelArg::Linear,
        gamma: None,
        epsilon: 1e-8,
        clusters: 8,
        diversity_on_selected: false,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::new("emit", format!("cannot create {}: {e}", dir.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::new("emit", format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn space_json(model: &InstanceSpaceModel) -> String {
    let mut s = serde_json::to_string_pretty(&model.to_file()).expect("space file serializes");
    s.push('\n');
    s
}

fn emit_evaluation(out: &Path, model: &InstanceSpaceModel, eval: &Evaluation) -> Result<()> {
    create_dir(out)?;
    let r = &eval.report;
    for w in &r.warnings {
        log::warn!("{w}");
    }
    write(out, "report.json", &r.to_json_string())?;
    write(out, "instance_space.csv", &report::instance_space_csv(&eval.space))?;
    write(
        out,
        "plot.svg",
        &report::render_svg(&eval.space, &model.boundary, &r.metrics.buggy_hull),
    )?;
    write(out, "features_hist.csv", &report::histograms_csv(&r.per_feature_distributions))?;
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let suite = load_suite(&args.suite)?;
    let config = analysis_config(
        Some(&args.space),
        Some(&args.geometry),
        &args.kernel,
        args.space.seed,
        suite.feature_names().len(),
    );
    let model = InstanceSpaceModel::fit(&suite, &config)?;
    log::info!("instance space spanned by {:?}", model.selected_names());
    let eval = model.evaluate(&suite, &config)?;
    emit_evaluation(&args.out, &model, &eval)?;
    write(&args.out, "space.json", &space_json(&model))?;
    Ok(())
}

fn diversity_json(score: &DiversityScore) -> serde_json::Value {
    json!({
        "shannon_h": sig9(score.shannon_h),
        "richness": score.richness_s,
        "evenness": sig9(score.evenness_j),
        "geometric_logdet": sig9(score.geometric_logdet.value()),
    })
}

fn diversity(args: DiversityArgs) -> Result<()> {
    let suite = load_suite(&args.suite)?;
    let n_features = suite.feature_names().len();
    let mut kernel = args.kernel;
    // no selection happens here, so there is nothing narrower to restrict to
    kernel.diversity_on_selected = false;
    let config = analysis_config(None, None, &kernel, args.seed, n_features);
    let z = corpus::standardize(&suite.feature_matrix()).map_err(PipelineError::Standardize)?;
    let score = pipeline::suite_diversity(&suite, z.values(), &[], &config)?;
    println!("{}", serde_json::to_string_pretty(&diversity_json(&score)).expect("json serializes"));
    Ok(())
}

fn project(args: ProjectArgs) -> Result<()> {
    let suite = load_suite(&args.suite)?;
    let config = analysis_config(
        Some(&args.space),
        None,
        &kernel_defaults(),
        args.space.seed,
        suite.feature_names().len(),
    );
    let model = InstanceSpaceModel::fit(&suite, &config)?;
    let space = model.instance_space(&suite)?;
    let p = &model.projection;
    let summary = json!({
        "selected_features": model.selected_names(),
        "A": (0..2).map(|i| p.a_matrix.row(i).iter().map(|&v| sig9(v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "B": (0..p.b_matrix.nrows()).map(|j| vec![sig9(p.b_matrix[(j, 0)]), sig9(p.b_matrix[(j, 1)])]).collect::<Vec<_>>(),
        "c": p.c_vector.iter().map(|&v| sig9(v)).collect::<Vec<_>>(),
        "objective_trace": p.objective_trace.iter().map(|&v| sig9(v)).collect::<Vec<_>>(),
        "trend_r2_features": p.trend_r2_features.iter().map(|&v| sig9(v)).collect::<Vec<_>>(),
        "trend_r2_outcome": sig9(p.trend_r2_outcome),
        "topo_spearman": sig9(p.topo_spearman),
        "converged": p.converged,
        "degenerate_init": p.degenerate_init,
    });
    create_dir(&args.out)?;
    let mut text = serde_json::to_string_pretty(&summary).expect("json serializes");
    text.push('\n');
    write(&args.out, "projection.json", &text)?;
    write(&args.out, "instance_space.csv", &report::instance_space_csv(&space))?;
    write(&args.out, "space.json", &space_json(&model))?;
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let text = fs::read_to_string(&args.space)
        .map_err(|e| Failure::new("load", format!("cannot read {}: {e}", args.space.display())))?;
    let file: SpaceFile = serde_json::from_str(&text)
        .map_err(|e| Failure::new("load", format!("malformed space file {}: {e}", args.space.display())))?;
    let model = file.into_model()?;
    let suite = load_suite(&args.suite)?;
    let config = analysis_config(
        None,
        Some(&args.geometry),
        &args.kernel,
        args.seed,
        model.feature_names.len(),
    );
    let eval = model.evaluate(&suite, &config)?;
    emit_evaluation(&args.out, &model, &eval)
}

fn strategy_name(s: QueryStrategy) -> &'static str {
    match s {
        QueryStrategy::Uncertainty => "uncertainty",
        QueryStrategy::Random => "random",
    }
}

fn curve_csv(session: &OracleSession) -> String {
    let mut out = String::from("queries,accuracy\n");
    for p in &session.curve {
        out.push_str(&format!("{},{:.6}\n", p.queries_used, p.heldout_accuracy));
    }
    out
}

fn oracle_sim(args: OracleArgs) -> Result<()> {
    let suite = corpus::load_suite(&args.input, suite_format(&args.input, args.format)).map_err(load_error)?;
    let known = suite.filter_rows(|_, c| c.outcome != OutcomeLabel::Unknown);
    if known.len() < suite.len() {
        log::warn!("{} pool entries without a label were left out", suite.len() - known.len());
    }
    let z = corpus::standardize(&known.feature_matrix()).map_err(PipelineError::Standardize)?;
    let labels: Vec<bool> = known.outcomes().iter().map(|o| o.is_effective()).collect();
    let ids = known.ids();

    create_dir(&args.out)?;
    let mut strategies: Vec<QueryStrategy> = args
        .strategy
        .iter()
        .map(|s| match s {
            StrategyArg::Uncertainty => QueryStrategy::Uncertainty,
            StrategyArg::Random => QueryStrategy::Random,
        })
        .collect();
    strategies.dedup();
    for strategy in strategies {
        let mut config = ActiveLearningConfig::new(args.budget as usize, strategy);
        config.seed = args.seed;
        config.seed_size = args.seed_size as usize;
        let session = oracle::simulate_active_learning(z.values(), &labels, &config)?;
        let (_, full_accuracy) = oracle::full_data_model(z.values(), &labels, &config)?;
        let name = strategy_name(strategy);
        log::info!(
            "{name}: {} queries, final held-out accuracy {:.4} (full data {:.4})",
            session.query_log.len(),
            session.curve.last().map_or(0.0, |p| p.heldout_accuracy),
            full_accuracy
        );
        write(&args.out, &format!("learning_curve_{name}.csv"), &curve_csv(&session))?;
        let summary = json!({
            "strategy": name,
            "budget": session.budget,
            "full_data_accuracy": sig9(full_accuracy),
            "queries": session.query_log.iter().map(|(i, y)| json!({
                "id": ids[*i],
                "label": if *y { "biased" } else { "unbiased" },
            })).collect::<Vec<_>>(),
            "labeled": session.labeled_ids.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
            "heldout": session.heldout_ids.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
            "weights": session.model.weights.iter().map(|&w| sig9(w)).collect::<Vec<_>>(),
            "bias_term": sig9(session.model.bias_term),
        });
        let mut text = serde_json::to_string_pretty(&summary).expect("json serializes");
        text.push('\n');
        write(&args.out, &format!("session_{name}.json"), &text)?;
    }

    if let Some(path) = &args.annotations {
        let annotations = AnnotationSet::load(path)?;
        let mut out = String::from("id,disagreement\n");
        for (id, h) in oracle::disagreement_ranking(&annotations, args.top_k) {
            out.push_str(&format!("{id},{h:.6}\n"));
        }
        write(&args.out, "disagreement.csv", &out)?;
    }
    Ok(())
}

fn write_suite(path: &Path, suite: &TestSuite) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = fs::File::create(path)
        .map_err(|e| Failure::new("emit", format!("cannot write {}: {e}", path.display())))?;
    corpus::write_suite_csv(suite, std::io::BufWriter::new(file)).map_err(|e| Failure::new("emit", e))
}

fn synth(args: SynthArgs) -> Result<()> {
    match args.kind {
        SynthKind::Planted => {
            let suite = fixtures::planted_cluster_suite_sized(args.seed, args.rows.unwrap_or(300) as usize);
            write_suite(&args.out, &suite)
        }
        SynthKind::Separable => {
            let (x, y) = fixtures::separable_pool(args.seed, args.rows.unwrap_or(200) as usize);
            let cases = (0..x.nrows())
                .map(|i| TestCase {
                    id: format!("p{:04}", i + 1),
                    raw_text: None,
                    features: vec![x[(i, 0)], x[(i, 1)]],
                    outcome: if y[i] { OutcomeLabel::Effective } else { OutcomeLabel::Ineffective },
                    category: None,
                })
                .collect();
            let suite = TestSuite::new(cases, vec!["x1".into(), "x2".into()]).map_err(|e| Failure::new("emit", e))?;
            write_suite(&args.out, &suite)
        }
        SynthKind::Dispersion => {
            create_dir(&args.out)?;
            let series = fixtures::dispersion_series(args.seed, args.count as usize, args.rows.unwrap_or(300) as usize);
            let mut index = String::from("suite,dispersion,detected_faults\n");
            for (s, item) in series.iter().enumerate() {
                let name = format!("suite_{s:02}.csv");
                write_suite(&args.out.join(&name), &item.suite)?;
                index.push_str(&format!("{name},{:.6},{}\n", item.dispersion, item.detected_faults));
            }
            write(&args.out, "series.csv", &index)?;
            Ok(())
        }
    }
}
