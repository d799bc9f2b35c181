use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Measure how adequately a test suite exercises an AI-based system.
///
/// Test cases are placed in a 2D instance space fitted to their features
/// and outcomes; the suite is scored by the area it spans, the area of its
/// failing region and the share of the feasible space it covers.
#[derive(Debug, Parser)]
#[command(name = "instascope", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and write report.json, instance_space.csv,
    /// plot.svg, features_hist.csv and space.json.
    Analyze(AnalyzeArgs),
    /// Print Shannon and geometric diversity of a suite as JSON.
    Diversity(DiversityArgs),
    /// Fit an instance space and write space.json, projection.json and
    /// instance_space.csv.
    Project(ProjectArgs),
    /// Score a suite in a previously fitted instance space (space.json).
    Metrics(MetricsArgs),
    /// Simulate the budgeted active-learning oracle and write learning curves.
    OracleSim(OracleArgs),
    /// Write a seeded synthetic suite.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Test suite file: CSV with id, outcome and f_* columns, or JSON.
    #[arg(long)]
    pub input: PathBuf,
    /// Input format [default: from the file extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Embeddings JSONL ({id, vector} per line) reduced by PCA and appended as pc_* features.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Principal components kept from --embeddings.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub embedding_dims: u32,
    /// Append surface features of the `text` column (automatic when the suite has no f_* columns).
    #[arg(long)]
    pub text_features: bool,
}

#[derive(Debug, Args)]
pub struct SpaceArgs {
    /// Maximum number of features spanning the instance space.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub features_k: u32,
    /// Absolute correlation above which the less significant feature is dropped.
    #[arg(long, default_value_t = 0.95)]
    pub redundancy_threshold: f64,
    /// Smallest balanced-accuracy gain that admits another feature.
    #[arg(long, default_value_t = 0.005)]
    pub min_gain: f64,
    /// Seed for corner sampling and clustering.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// Coverage grid cells per axis.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid: u32,
    /// Drop kNN outliers among failing tests before taking the buggy hull.
    #[arg(long)]
    pub prune_outliers: bool,
    /// Neighbour count used by --prune-outliers.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub prune_neighbours: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    /// Gram matrix of unit-normalized rows.
    Linear,
    /// exp(-gamma·‖xi − xj‖²).
    Rbf,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Similarity kernel for geometric diversity.
    #[arg(long, value_enum, default_value_t = KernelArg::Linear)]
    pub kernel: KernelArg,
    /// RBF bandwidth [default: 1 / number of features]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ridge added to the kernel diagonal.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// k-means clusters used as Shannon categories when the suite has no category column.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub clusters: u32,
    /// Geometric diversity over the selected features instead of all of them.
    #[arg(long)]
    pub diversity_on_selected: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiversityArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Seed for k-means initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[command(flatten)]
    pub space: SpaceArgs,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Instance space written by `analyze` or `project`.
    #[arg(long)]
    pub space: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Seed for k-means initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Uncertainty,
    Random,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Pool file: a suite whose outcome column reads biased/unbiased (or fail/pass).
    #[arg(long)]
    pub input: PathBuf,
    /// Input format [default: from the file extension, else csv]
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Maximum number of teacher queries.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub budget: u32,
    /// Query strategies to run; repeat or comma-separate for several.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub strategy: Vec<StrategyArg>,
    /// Seed for the random strategy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Labeled instances before the first query (half per class).
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    pub seed_size: u32,
    /// Annotations JSONL ({id, annotator, label} per line) to rank by disagreement.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Number of cases listed in disagreement.csv.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// 8 uniform features with a planted failure cluster in f_1 × f_2.
    Planted,
    /// 2D pool labeled biased/unbiased by a line.
    Separable,
    /// A series of Gaussian suites of growing dispersion sharing planted faults.
    Dispersion,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tests per suite [default: 300, or 200 for separable]
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub rows: Option<u32>,
    /// Suites in a dispersion series.
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    pub count: u32,
    /// Output CSV file, or a directory for --kind dispersion.
    #[arg(long)]
    pub out: PathBuf,
}
