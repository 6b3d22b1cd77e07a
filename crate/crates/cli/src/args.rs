use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "assassin",
    version,
    about = "Merlin inference for 5-player Avalon"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Input file (stdin when omitted).
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long = "out", global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Skip malformed or invalid input lines instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
    /// Run manifest path (defaults to `<out>.manifest.json` when --out is set).
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate synthetic games as JSON lines.
    Simulate(SimulateArgs),
    /// Check every game against the rules and report violations.
    Validate,
    /// Keep assassination-eligible games, canonicalized.
    Filter,
    /// Write the feature matrix as CSV.
    Featurize(FeatureArgs),
    /// Train a classifier and save it as JSON.
    Train(TrainArgs),
    /// Cross-validate a classifier and report accuracy.
    Cv(CvArgs),
    /// Search every subset of the engineered statistics.
    SelectFeatures(SelectArgs),
    /// Recommend a target for one game or Assassin view.
    Predict(PredictArgs),
    /// Compare model and human shots on recorded games.
    Analyze(AnalyzeArgs),
    /// Serve live advice over HTTP on localhost.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub games: usize,
    /// How often Merlin acts on spy knowledge.
    #[arg(long, default_value_t = 0.5)]
    pub leak: f64,
    /// Chance a spy on a mission fails it.
    #[arg(long, default_value_t = 0.5)]
    pub sabotage: f64,
    /// Approval rate of uninformed voters.
    #[arg(long, default_value_t = 0.7)]
    pub approve: f64,
    /// Emit only assassination-eligible games.
    #[arg(long)]
    pub eligible_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Engineered,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleanRuleArg {
    NoSpies,
    FullResistance,
}

#[derive(Debug, Args, Serialize)]
pub struct FeatureArgs {
    #[arg(long, value_enum, default_value_t = FeatureKind::Engineered)]
    pub features: FeatureKind,
    /// Engineered statistics to use, e.g. f1,f2,f3,f4.
    #[arg(long, default_value = "f1,f2,f3,f4")]
    pub subset: String,
    /// What counts as a correct team for the first-clean-proposal statistic.
    #[arg(long, value_enum, default_value_t = CleanRuleArg::NoSpies)]
    pub clean_rule: CleanRuleArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearSvc,
    RbfSvc,
    Mlp,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainerArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::LinearSvc)]
    pub model: ModelKind,
    /// SVC penalty.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// RBF width (default 1 / (features * variance)).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// MLP hidden layer widths.
    #[arg(long, default_value = "16,16,8")]
    pub layers: String,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Solver iteration cap (model-specific default).
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Solver tolerance (model-specific default).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub trainer: TrainerArgs,
    /// Also write the MLP per-epoch loss and accuracy as CSV.
    #[arg(long, value_name = "PATH")]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub trainer: TrainerArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Evaluate one shuffled split with this test fraction instead of k folds.
    #[arg(long, value_name = "FRACTION")]
    pub holdout: Option<f64>,
    /// Training seeds to average over (default 5 for mlp, 1 otherwise).
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    /// Statistics to search over.
    #[arg(long, default_value = "f1,f2,f3,f4,f5,f6,f7,f8,f9")]
    pub candidates: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = CleanRuleArg::NoSpies)]
    pub clean_rule: CleanRuleArg,
    /// Subsets listed in the text summary.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// A game log or an Assassin view as JSON (stdin when omitted).
    #[arg(long)]
    pub game: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}
