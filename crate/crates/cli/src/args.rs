use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "nnsurv", version)]
#[command(about = "Nearest-neighbor and kernel survival estimators: benchmarks, synthetic data and error bounds")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for CSV tables and plots.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated train/test benchmark with cross-validated parameters.
    Bench(BenchArgs),
    /// Same pipeline, additionally emitting every candidate's CV score.
    Cv(BenchArgs),
    /// Sample a synthetic dataset.
    Synth(SynthArgs),
    /// Evaluate the tail-bound right-hand sides term by term.
    Bounds(BoundsArgs),
    /// Monte-Carlo check of the k-NN tail bound.
    VerifyBounds(VerifyArgs),
    /// Sup-norm error of the k-NN estimate as n grows.
    Consistency(ConsistencyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelName {
    Expreg,
    Weibreg,
    Weibmix,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long = "model", value_enum, default_value = "expreg")]
    pub model: ModelName,
    /// Weibull shape (weibreg, weibmix).
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = 1.0)]
    pub h_t0: f64,
    /// Survival coefficients; their count sets the feature dimension.
    #[arg(long, value_delimiter = ',', default_value = "1.0", allow_negative_numbers = true)]
    pub beta_t: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub h_c0: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.0", allow_negative_numbers = true)]
    pub beta_c: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub psi_t1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub psi_t2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub psi_c1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub psi_c2: f64,
    /// Mixture switch point in (1, 100).
    #[arg(long, default_value_t = 50.0)]
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum MetricArg {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum KernelArg {
    Box,
    Triangle,
    Epanechnikov,
    Tgauss,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum CriterionArg {
    Cindex,
    Ipec,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum CensoringArg {
    /// The scored method refit on flipped event indicators.
    Same,
    /// Feature-blind Kaplan-Meier of the censoring times.
    Km,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum MetricOut {
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// CSV input; without it a synthetic sample of `--n` records is used.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "event")]
    pub event_col: String,
    /// Columns to leave out of the feature set.
    #[arg(long = "ignore-col", value_delimiter = ',')]
    pub ignore_cols: Vec<String>,
    /// Synthetic sample size when no `--data` is given.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[command(flatten)]
    pub model: ModelArgs,

    /// Methods: knn, wknn, radius, kernel, cdfreg, cdfreg-w, rsf, rsf-kernel,
    /// or a full name such as kernel-box or knn-l1. `kernel` without
    /// `--kernel` expands to all four kernels.
    #[arg(long = "estimator", value_delimiter = ',',
          default_value = "knn,wknn,radius,kernel,cdfreg,cdfreg-w,rsf,rsf-kernel")]
    pub estimators: Vec<String>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub tgauss_sigma: u8,
    #[arg(long, value_enum, default_value = "l2")]
    pub metric: MetricArg,
    /// Fix the neighbor count(s) instead of the default grid.
    #[arg(long = "k", value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Fix the bandwidth(s) (standardized feature scale).
    #[arg(long = "bandwidth", value_delimiter = ',')]
    pub bandwidth: Option<Vec<f64>>,
    #[arg(long = "n-trees", value_delimiter = ',')]
    pub n_trees: Option<Vec<usize>>,
    /// Maximum tree depth(s); 0 is unlimited.
    #[arg(long = "max-depth", value_delimiter = ',')]
    pub max_depth: Option<Vec<usize>>,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    #[arg(long)]
    pub mtry: Option<usize>,

    #[arg(long, default_value_t = 0.7)]
    pub split_fraction: f64,
    /// Number of random train/test splits.
    #[arg(long = "splits", alias = "repeats", default_value_t = 10)]
    pub splits: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value = "cindex")]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 1e-6)]
    pub ipec_theta_lb: f64,
    #[arg(long, default_value_t = 75.0)]
    pub ipec_tau_percentile: f64,
    /// Censoring estimate inside IPEC, for both selection and scoring.
    #[arg(long, value_enum, default_value = "same")]
    pub ipec_censoring: CensoringArg,
    #[arg(long, value_enum, default_value = "csv")]
    pub metric_out: MetricOut,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Output file; defaults to `<out-dir>/synth.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "event")]
    pub event_col: String,
    /// Append the latent survival and censoring times.
    #[arg(long)]
    pub debug_truth: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Bound kinds: knn, radius, kernel, na-knn, na-radius, na-kernel.
    #[arg(long = "kind", value_delimiter = ',',
          default_value = "knn,radius,kernel,na-knn,na-radius,na-kernel")]
    pub kinds: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub f_star: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    pub ball_mass: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub phi: f64,
    /// Also report the sufficient k range for failure probability gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub h_t0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta_t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub h_c0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta_c: f64,
    /// Query point in [0,1].
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    /// Settings as `n:k:epsilon`.
    #[arg(long = "setting", value_delimiter = ',',
          default_value = "30000:12000:0.9,40000:16000:0.8,60000:24000:0.7")]
    pub settings: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum KRuleArg {
    /// round(scale * n^exponent)
    Power,
    /// floor(c1 n^{2a/(2a+d)} log(c2 n)^{d/(2a+d)})
    Schedule,
}

#[derive(Debug, Clone, Args)]
pub struct ConsistencyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "n-values", value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    pub n_values: Vec<usize>,
    #[arg(long, value_enum, default_value = "power")]
    pub k_rule: KRuleArg,
    #[arg(long, default_value_t = 1.0)]
    pub k_scale: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub k_exponent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    #[arg(long, value_enum, default_value = "l2")]
    pub metric: MetricArg,
}
