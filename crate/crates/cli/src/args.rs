use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use fpqr::basis::DEFAULT_ORDER;
use fpqr::qcov::QcovMethod;
use fpqr::simulate::ErrorDist;

#[derive(Parser, Debug)]
#[command(name = "fpqr", version, about = "Function-on-function quantile regression by functional partial quantile regression")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file with one table per command; its keys are flag names.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic data set with known intercept and coefficient surface.
    Simulate(SimulateArgs),
    /// Fit a model and save it.
    Fit(FitArgs),
    /// Predict conditional quantile curves with a saved model.
    Predict(PredictArgs),
    /// Pointwise prediction intervals from two quantile fits.
    Interval(IntervalArgs),
    /// Expanding-window one-step-ahead forecasts of a curve series.
    Forecast(ForecastArgs),
    /// Accuracy metrics for predictions and estimates.
    Evaluate(EvaluateArgs),
    /// Time model fits across methods, sample sizes and component counts.
    Bench(BenchArgs),
    /// Monte Carlo study on simulated data.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Penalty {
    /// Held-out fold size.
    Fold,
    /// Total number of curves.
    Total,
}

/// Error regime flags shared by `simulate` and `mc`.
#[derive(Args, Debug, Clone)]
pub struct ErrorArgs {
    /// none, normal, t5 or chisq1.
    #[arg(long, default_value = "normal")]
    pub error_dist: ErrorDist,
    /// Fraction of outlier curves (0.05 or 0.10); overrides --error-dist.
    #[arg(long)]
    pub contamination: Option<f64>,
    /// Observe predictors without measurement noise.
    #[arg(long)]
    pub no_predictor_noise: bool,
}

impl ErrorArgs {
    pub fn dist(&self) -> ErrorDist {
        match self.contamination {
            Some(gamma) => ErrorDist::Contaminated { gamma },
            None => self.error_dist,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [4, 5, 8, 10, 20])]
    pub k_y_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [4, 5, 8, 10, 20])]
    pub k_x_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [1, 2, 3, 4, 5])]
    pub h_grid: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Sample size in the BIC penalty.
    #[arg(long, value_enum, default_value_t = Penalty::Fold)]
    pub penalty: Penalty,
    /// B-spline order on both sides.
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub order: usize,
}

/// Model size: fixed with --k-y/--k-x/--h, or chosen by --auto.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// dodge, choi or li.
    #[arg(long, default_value = "choi")]
    pub qcov: QcovMethod,
    #[arg(long)]
    pub k_y: Option<usize>,
    #[arg(long)]
    pub k_x: Option<usize>,
    /// Number of components.
    #[arg(long)]
    pub h: Option<usize>,
    /// Select K_Y, K_X and h by cross-validated grid search.
    #[arg(long)]
    pub auto: bool,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub cv_seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub errors: ErrorArgs,
    /// One error draw per curve instead of one per grid point.
    #[arg(long)]
    pub shared_error: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Where --auto writes the CV table (default: cv_table.csv next to the model).
    #[arg(long)]
    pub cv_table: Option<PathBuf>,
    /// Write the coefficient surface on the training grids (rows follow the predictor grid).
    #[arg(long)]
    pub surface_out: Option<PathBuf>,
    /// Write the intercept function on the response grid.
    #[arg(long)]
    pub intercept_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct IntervalArgs {
    #[arg(long)]
    pub y_train: PathBuf,
    #[arg(long)]
    pub x_train: PathBuf,
    #[arg(long)]
    pub x_test: PathBuf,
    #[arg(long, default_value_t = 0.025)]
    pub tau_lo: f64,
    #[arg(long, default_value_t = 0.975)]
    pub tau_hi: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory receiving q_lo.csv and q_hi.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    /// Curves in time order.
    #[arg(long)]
    pub series: PathBuf,
    /// Index (0-based) of the first curve to forecast.
    #[arg(long)]
    pub split: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.025)]
    pub tau_lo: f64,
    #[arg(long, default_value_t = 0.975)]
    pub tau_hi: f64,
    /// Refit the models every this many forecasts.
    #[arg(long, default_value_t = 1)]
    pub refit_every: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Observed curves.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Predicted quantile curves.
    #[arg(long, requires = "truth")]
    pub pred: Option<PathBuf>,
    /// Lower interval bounds (with --hi).
    #[arg(long, requires_all = ["hi", "truth"])]
    pub lo: Option<PathBuf>,
    #[arg(long, requires = "lo")]
    pub hi: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub nominal: f64,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, requires = "alpha_est")]
    pub alpha_true: Option<PathBuf>,
    #[arg(long)]
    pub alpha_est: Option<PathBuf>,
    #[arg(long, requires = "beta_est")]
    pub beta_true: Option<PathBuf>,
    #[arg(long)]
    pub beta_est: Option<PathBuf>,
    /// Label written in the dataset column.
    #[arg(long, default_value = "data")]
    pub dataset: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [50, 100, 250, 500, 1000])]
    pub n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10])]
    pub h_list: Vec<usize>,
    /// Basis size on both sides.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [QcovMethod::Dodge, QcovMethod::Choi, QcovMethod::Li])]
    pub qcov_list: Vec<QcovMethod>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct McArgs {
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [50, 100, 250, 500])]
    pub n_list: Vec<usize>,
    #[command(flatten)]
    pub errors: ErrorArgs,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [0.5])]
    pub tau_list: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [QcovMethod::Dodge, QcovMethod::Choi, QcovMethod::Li])]
    pub qcov_list: Vec<QcovMethod>,
    /// Size of the fresh test set scored by RMSPE.
    #[arg(long, default_value_t = 200)]
    pub n_test: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}
