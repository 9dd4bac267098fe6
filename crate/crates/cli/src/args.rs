use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rfod::{Aggregation, DistanceVariant};

#[derive(Debug, Parser)]
#[command(
    name = "rfod",
    version,
    about = "Outlier detection by per-feature random forest reconstruction"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one forest per feature and save the model.
    Fit(FitArgs),
    /// Score a test CSV with a saved model.
    Detect(DetectArgs),
    /// Split a labeled CSV, fit on normal rows, score and report metrics.
    Eval(EvalArgs),
    /// Time fitting and scoring over training-set fractions.
    Bench(BenchArgs),
    /// Write cell scores of selected rows as heatmap data.
    ExportHeatmap(HeatmapArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Agd,
    Gd,
    GdIqr,
}

impl From<DistanceArg> for DistanceVariant {
    fn from(d: DistanceArg) -> Self {
        match d {
            DistanceArg::Agd => DistanceVariant::Agd,
            DistanceArg::Gd => DistanceVariant::Gd,
            DistanceArg::GdIqr => DistanceVariant::GdIqr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AggArg {
    Uwa,
    Mean,
}

impl From<AggArg> for Aggregation {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Uwa => Aggregation::Uwa,
            AggArg::Mean => Aggregation::Mean,
        }
    }
}

#[derive(Debug, Args)]
pub struct SchemaArgs {
    /// Schema sidecar JSON: a list of {"name", "kind"} with kind numerical,
    /// categorical or label. Inferred from the CSV when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,

    /// Label column (0/1), excluded from the features.
    #[arg(long)]
    pub label: Option<String>,

    /// Columns to treat as categorical when inferring the schema.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Tail quantile of the numerical distance scale, in (0, 0.5).
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,

    /// Fraction of trees kept per forest after OOB ranking, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    #[arg(long, default_value_t = 100)]
    pub trees: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Features tried per split (default: sqrt(p) for categorical targets,
    /// p/3 for numerical ones).
    #[arg(long)]
    pub mtry: Option<usize>,

    #[arg(long)]
    pub max_depth: Option<usize>,

    /// Cap for numerical cell scores when a training column is constant.
    #[arg(long, default_value_t = rfod::scoring::DEFAULT_SCORE_CAP)]
    pub quantile_cap: f64,

    #[arg(long, value_enum, default_value_t = DistanceArg::Agd)]
    pub distance: DistanceArg,

    #[arg(long = "agg", value_enum, default_value_t = AggArg::Uwa)]
    pub aggregation: AggArg,
}

/// Scoring settings that override a saved model's without refitting.
#[derive(Debug, Args)]
pub struct ScoringArgs {
    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long, value_enum)]
    pub distance: Option<DistanceArg>,

    #[arg(long = "agg", value_enum)]
    pub aggregation: Option<AggArg>,

    #[arg(long)]
    pub quantile_cap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,

    #[command(flatten)]
    pub schema: SchemaArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Model directory to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub test: PathBuf,

    /// Label column present in the test CSV, ignored for scoring.
    #[arg(long)]
    pub label: Option<String>,

    #[command(flatten)]
    pub scoring: ScoringArgs,

    /// Rows included in heatmap.json, highest row scores first.
    #[arg(long, default_value_t = 50)]
    pub heatmap_rows: usize,

    /// Also write x_hat.csv, uncertainty.csv and cat_probabilities.csv.
    #[arg(long)]
    pub reconstruction: bool,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labeled CSV.
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub schema: SchemaArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Fraction of normal rows used for training.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,

    /// Flagged fraction for F1 and accuracy: `auto` (test anomaly ratio) or
    /// a number in (0, 1).
    #[arg(long, default_value = "auto")]
    pub contamination: String,

    /// Score and report once per alpha, reusing the fitted forests.
    #[arg(long, value_delimiter = ',')]
    pub sweep_alpha: Vec<f64>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub schema: SchemaArgs,

    #[command(flatten)]
    pub model: ModelArgs,

    /// Training-set fractions of the (normal) rows.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1.0")]
    pub fractions: Vec<f64>,

    /// Repetitions per fraction; the median time is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub test: PathBuf,

    #[arg(long)]
    pub label: Option<String>,

    #[command(flatten)]
    pub scoring: ScoringArgs,

    /// Explicit test row ids (0-based). Overrides --top.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,

    /// Highest-scoring rows to export.
    #[arg(long, default_value_t = 20)]
    pub top: usize,

    #[arg(long)]
    pub out: PathBuf,
}
