use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uniform_lse::simulation::XSpec;
use uniform_lse::uniform_sum::DEFAULT_EXACT_LIMIT;
use uniform_lse::Coefficient;

#[derive(Debug, Parser)]
#[command(
    name = "uniform-lse",
    version,
    about = "Exact least-squares inference for simple linear regression with uniform errors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Least-squares fit, design summary and the unbiased theta^2 estimate.
    Fit(FitArgs),
    /// Exact density of a coefficient estimator (or of a raw weighted sum) on a grid.
    Density(DensityArgs),
    /// Confidence intervals for the coefficients.
    Ci(CiArgs),
    /// Two-sided tests of beta_j = 0.
    Test(TestArgs),
    /// Monte Carlo replicates of the model.
    Simulate(SimulateArgs),
    /// Empirical coverage of several interval methods across sample sizes.
    Coverage(CoverageArgs),
    /// Conditions of the normal approximation for a design.
    Diagnose(DiagnoseArgs),
    /// Distance between the standardized exact law and its normal limit.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ExactUniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoefArg {
    Beta0,
    Beta1,
    Both,
}

impl CoefArg {
    pub fn list(self) -> Vec<Coefficient> {
        match self {
            CoefArg::Beta0 => vec![Coefficient::Intercept],
            CoefArg::Beta1 => vec![Coefficient::Slope],
            CoefArg::Both => Coefficient::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SingleCoef {
    Beta0,
    Beta1,
}

impl From<SingleCoef> for Coefficient {
    fn from(c: SingleCoef) -> Self {
        match c {
            SingleCoef::Beta0 => Coefficient::Intercept,
            SingleCoef::Beta1 => Coefficient::Slope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseFamily {
    Uniform,
    Gaussian,
    Both,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format written to stdout.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write an SVG figure to this path.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
}

/// How the noise scale is supplied. `--theta` and `--sigma-sq` describe the
/// same variance (`sigma^2 = theta^2 / 3`), so only one may be given.
#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Half-width of the uniform errors.
    #[arg(long, group = "scale")]
    pub theta: Option<f64>,
    /// Error variance; converted with theta = sqrt(3 sigma^2) where needed.
    #[arg(long, group = "scale")]
    pub sigma_sq: Option<f64>,
    /// Plug in the unbiased estimate from the residuals (approximate).
    #[arg(long, group = "scale")]
    pub estimate_theta: bool,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    /// Largest number of nonzero weights handled exactly.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    /// Use the normal approximation when exact mode is over the limit.
    #[arg(long)]
    pub fallback_normal: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with an `x,y` header (`-` for stdin).
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// CSV data; the law is centred at the fitted coefficient unless --center is given.
    #[arg(long, short, conflicts_with_all = ["weights", "x_spec"])]
    pub input: Option<PathBuf>,
    /// Design family instead of data, e.g. `equispaced:-10:10` (needs --n).
    #[arg(long, value_parser = parse_x_spec, requires = "n", conflicts_with = "weights")]
    pub x_spec: Option<XSpec>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed for a random design family.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Raw weights `w1,w2,...`: density of sum w_k eps_k itself.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SingleCoef::Beta1)]
    pub coefficient: SingleCoef,
    #[command(flatten)]
    pub scale: ScaleArgs,
    /// Location of the law (defaults to the estimate, or 0).
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<f64>,
    /// Grid start (defaults to the lower end of the support).
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Grid end (defaults to the upper end of the support).
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    /// Grid spacing; overrides --points.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub points: usize,
    /// Add the normal approximation as a second column and plot curve.
    #[arg(long)]
    pub overlay_normal: bool,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::ExactUniform)]
    pub method: MethodArg,
    #[command(flatten)]
    pub scale: ScaleArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = CoefArg::Both)]
    pub coefficient: CoefArg,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::ExactUniform)]
    pub method: MethodArg,
    #[command(flatten)]
    pub scale: ScaleArgs,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CoefArg::Both)]
    pub coefficient: CoefArg,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Design family: `equispaced:A:B`, `iid-uniform:A:B` or `fixed:X1,X2,...`.
    #[arg(long, value_parser = parse_x_spec, default_value = "iid-uniform:-10:10")]
    pub x_spec: XSpec,
    #[arg(long, default_value_t = 7.0, allow_hyphen_values = true)]
    pub beta0: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    pub beta1: f64,
    #[arg(long, default_value_t = 100_000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Draw a new design for every replicate instead of one shared design.
    #[arg(long)]
    pub resample_x: bool,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Error law: `uniform:THETA` or `gaussian:SIGMA_SQ`.
    #[arg(long, default_value = "uniform:3")]
    pub noise: String,
    /// Interval method recorded per replicate (default: the one natural for the noise).
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[command(flatten)]
    pub scale: ScaleArgs,
    /// Coefficient shown in the plot and used for the KS comparison.
    #[arg(long, value_enum, default_value_t = SingleCoef::Beta0)]
    pub coefficient: SingleCoef,
    /// JSON only: include a Kolmogorov-Smirnov comparison with the exact law.
    #[arg(long)]
    pub ks: bool,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    pub n_list: Vec<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Uniform half-width; the Gaussian family gets the same variance.
    #[arg(long, group = "noise_scale")]
    pub theta: Option<f64>,
    /// Gaussian variance; the uniform family gets the same variance.
    #[arg(long, group = "noise_scale")]
    pub sigma_sq: Option<f64>,
    #[arg(long, value_enum, default_value_t = NoiseFamily::Both)]
    pub noise: NoiseFamily,
    /// Variance assumed by the mis-specified Gaussian interval.
    #[arg(long, default_value_t = 1.0)]
    pub pitfall_sigma_sq: f64,
    #[command(flatten)]
    pub exact: ExactArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, short, conflicts_with = "x_spec")]
    pub input: Option<PathBuf>,
    #[arg(long, value_parser = parse_x_spec, requires = "n")]
    pub x_spec: Option<XSpec>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long, value_parser = parse_x_spec, default_value = "equispaced:-10:10")]
    pub x_spec: XSpec,
    #[arg(long, value_delimiter = ',', default_value = "5,8,12,16,20")]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 3.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub grid_points: usize,
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn parse_x_spec(s: &str) -> Result<XSpec, String> {
    s.parse().map_err(|e: uniform_lse::Error| e.to_string())
}
