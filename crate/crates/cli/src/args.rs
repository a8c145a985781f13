//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "boostkit", version, about = "Statistical boosting: AdaBoost, gradient boosting and likelihood-based boosting")]
pub struct Cli {
    /// Worker threads for per-component fits and resampling.
    #[arg(long, global = true, env = "BOOSTKIT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a boosting model and write the model plus report tables.
    Fit(FitArgs),
    /// Predict from a saved model.
    Predict(PredictArgs),
    /// Choose the stopping iteration by resampling or an information criterion.
    Cv(CvArgs),
    /// Write partial effects (and confidence bands where available).
    Effects(EffectsArgs),
    /// Generate the nonlinear one-predictor simulation data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Gradient,
    Adaboost,
    LikelihoodGlm,
    LikelihoodCox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerKind {
    Linear,
    Pspline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Link,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Resampling,
    Aicc,
    Bic,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (continuous or binary).
    #[arg(long)]
    pub response: Option<String>,
    /// Survival time column (Cox engine).
    #[arg(long)]
    pub time: Option<String>,
    /// Survival status column, 0/1 (Cox engine).
    #[arg(long)]
    pub status: Option<String>,
    /// Predictor columns to use (default: every non-response column).
    #[arg(long, value_delimiter = ',')]
    pub predictors: Option<Vec<String>>,
    /// Missing-value policy: reject or median.
    #[arg(long, default_value = "reject")]
    pub missing: String,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "gradient")]
    pub engine: Engine,
    /// Loss family (gradient: l2, laplace, huber, exponential, logistic, gamma;
    /// likelihood-glm: gaussian, logistic, poisson).
    #[arg(long)]
    pub family: Option<String>,
    /// Fixed Huber threshold (default: adaptive).
    #[arg(long)]
    pub huber_delta: Option<f64>,
    #[arg(long, value_enum, default_value = "linear")]
    pub learner: LearnerKind,
    /// Per-column learner overrides as name:learner pairs.
    #[arg(long = "learner-override", value_delimiter = ',')]
    pub learner_overrides: Vec<String>,
    /// Target degrees of freedom of P-spline learners.
    #[arg(long, default_value_t = 4.0)]
    pub df: f64,
    /// Number of boosting iterations.
    #[arg(long, default_value_t = 100)]
    pub mstop: usize,
    /// Step length of gradient boosting.
    #[arg(long, default_value_t = 0.1)]
    pub sl: f64,
    /// Step size from which the likelihood-boosting penalty is derived.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Explicit likelihood-boosting penalty.
    #[arg(long, conflicts_with = "nu")]
    pub lambda: Option<f64>,
    /// Mandatory unpenalized covariates (likelihood engines).
    #[arg(long, value_delimiter = ',')]
    pub unpenalized: Vec<String>,
    /// Standardize predictors before fitting.
    #[arg(long)]
    pub standardize: bool,
    /// Seed for all randomness (recorded in outputs).
    #[arg(long, default_value_t = boostkit::data::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Iteration to predict at (default: all).
    #[arg(long)]
    pub at_m: Option<usize>,
    #[arg(long, value_enum, default_value = "link")]
    pub scale: ScaleArg,
    #[arg(long, default_value = "reject")]
    pub missing: String,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// kfold:K, bootstrap:B or subsample:B:FRACTION.
    #[arg(long, default_value = "bootstrap:25")]
    pub scheme: String,
    /// Stratify resamples by class label or event status.
    #[arg(long)]
    pub stratified: bool,
    /// Iteration grid FROM:TO[:STRIDE] (default 1:mstop).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, value_enum, default_value = "resampling")]
    pub criterion: CriterionArg,
    /// Refit on all data at the selected iteration and write the model.
    #[arg(long)]
    pub refit: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EffectsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training data (grid ranges; response needed for likelihood bands).
    #[command(flatten)]
    pub data: DataArgs,
    /// Components to report (default: all).
    #[arg(long, value_delimiter = ',')]
    pub component: Option<Vec<String>>,
    /// Grid points per component.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long)]
    pub at_m: Option<usize>,
    /// Output directory; one TSV per component.
    #[arg(long, default_value = "effects")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = boostkit::data::DEFAULT_SEED)]
    pub seed: u64,
    /// CSV with columns x,y.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional TSV with the noise-free function values.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}
