//! Seeded Monte Carlo engine for the regression model.
//!
//! Every random draw is addressed by `(seed, replicate, position)` through
//! a counter-based generator, so a study is reproducible bit for bit and
//! independent of the number of worker threads. Results are gathered in
//! replicate order.

mod convergence;
mod coverage;
mod ks;
pub mod report;
mod rng;

pub use convergence::{convergence_study, ConvergenceConfig, ConvergenceRow};
pub use coverage::{coverage_study, CoverageReport, CoverageRow};
pub use ks::{ks_against_exact, ks_statistic, ks_statistic_sorted, KsReport};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{law_for_with, Coefficient};
use crate::numeric::normal;
use crate::uniform_sum::ExactOptions;
use crate::regression::{equispaced, fit_with_design, summarize, Dataset, DesignSummary, FitResult};
use rng::{stream_rng, DESIGN_STREAM};

/// How covariate values are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XSpec {
    /// `x_k = (b - a)(k - 1)/(n - 1) + a`.
    Equispaced { a: f64, b: f64 },
    /// Independent `U(a, b)` draws.
    IidUniform { a: f64, b: f64 },
    Fixed { values: Vec<f64> },
}

impl XSpec {
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            XSpec::Equispaced { a, b } | XSpec::IidUniform { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "x range needs a < b, got [{a}, {b}]"
                    )));
                }
            }
            XSpec::Fixed { values } => {
                if values.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "fixed design has {} values but n = {n}",
                        values.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The design for sample size `n`; random designs use the seed's
    /// reserved design stream.
    pub fn design(&self, n: usize, seed: u64) -> Vec<f64> {
        match self {
            XSpec::Equispaced { a, b } => equispaced(n, *a, *b),
            XSpec::IidUniform { a, b } => {
                let mut rng = stream_rng(seed, DESIGN_STREAM);
                draw_uniform_x(&mut rng, n, *a, *b)
            }
            XSpec::Fixed { values } => values.clone(),
        }
    }
}

fn draw_uniform_x(rng: &mut ChaCha8Rng, n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(a..b)).collect()
}

impl fmt::Display for XSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XSpec::Equispaced { a, b } => write!(f, "equispaced:{a}:{b}"),
            XSpec::IidUniform { a, b } => write!(f, "iid-uniform:{a}:{b}"),
            XSpec::Fixed { values } => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "fixed:{}", parts.join(","))
            }
        }
    }
}

/// Parses `equispaced:A:B`, `iid-uniform:A:B` or `fixed:X1,X2,...`.
impl FromStr for XSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse x spec `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let range = |rest: &str| -> Result<(f64, f64)> {
            let (a, b) = rest.rsplit_once(':').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        match kind {
            "equispaced" => range(rest).map(|(a, b)| XSpec::Equispaced { a, b }),
            "iid-uniform" | "iid_uniform" => range(rest).map(|(a, b)| XSpec::IidUniform { a, b }),
            "fixed" => rest
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()
                .map(|values| XSpec::Fixed { values }),
            _ => Err(bad()),
        }
    }
}

/// Error law of the simulated responses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    Uniform { theta: f64 },
    Gaussian { sigma_sq: f64 },
}

impl Noise {
    pub fn variance(self) -> f64 {
        match self {
            Noise::Uniform { theta } => theta * theta / 3.0,
            Noise::Gaussian { sigma_sq } => sigma_sq,
        }
    }

    /// Uniform half-width with the same variance.
    pub fn equivalent_theta(self) -> f64 {
        (3.0 * self.variance()).sqrt()
    }

    fn validate(self) -> Result<()> {
        let ok = match self {
            Noise::Uniform { theta } => theta > 0.0 && theta.is_finite(),
            Noise::Gaussian { sigma_sq } => sigma_sq > 0.0 && sigma_sq.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("noise parameter must be positive: {self}")))
        }
    }

    fn sampler(self) -> NoiseSampler {
        match self {
            Noise::Uniform { theta } => NoiseSampler::Uniform(theta),
            Noise::Gaussian { sigma_sq } => {
                NoiseSampler::Gaussian(Normal::new(0.0, sigma_sq.sqrt()).expect("validated sigma"))
            }
        }
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Uniform { theta } => write!(f, "uniform:{theta}"),
            Noise::Gaussian { sigma_sq } => write!(f, "gaussian:{sigma_sq}"),
        }
    }
}

/// Parses `uniform:THETA` or `gaussian:SIGMA_SQ`.
impl FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse noise `{s}`"));
        let (kind, v) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = v.parse().map_err(|_| bad())?;
        let noise = match kind {
            "uniform" => Noise::Uniform { theta: v },
            "gaussian" | "normal" => Noise::Gaussian { sigma_sq: v },
            _ => return Err(bad()),
        };
        noise.validate()?;
        Ok(noise)
    }
}

enum NoiseSampler {
    Uniform(f64),
    Gaussian(Normal<f64>),
}

impl NoiseSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseSampler::Uniform(theta) => rng.random_range(-theta..=*theta),
            NoiseSampler::Gaussian(dist) => dist.sample(rng),
        }
    }
}

/// Where an interval method gets its scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Known(f64),
    /// Plug-in estimate from the replicate's residuals.
    Estimated,
}

/// Confidence-interval procedure evaluated on each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalMethod {
    /// Exact uniform law with `theta` known or replaced by `sqrt(theta_sq_hat)`.
    ExactUniform { theta: ParamSource },
    /// Normal theory with `sigma^2` known or replaced by `sigma_sq_hat`.
    Gaussian { sigma_sq: ParamSource },
}

impl IntervalMethod {
    pub fn label(&self) -> String {
        match self {
            IntervalMethod::ExactUniform { theta: ParamSource::Known(t) } => {
                format!("exact_uniform(theta={t})")
            }
            IntervalMethod::ExactUniform { theta: ParamSource::Estimated } => {
                "exact_uniform(theta=plugin)".into()
            }
            IntervalMethod::Gaussian { sigma_sq: ParamSource::Known(s) } => {
                format!("gaussian(sigma_sq={s})")
            }
            IntervalMethod::Gaussian { sigma_sq: ParamSource::Estimated } => {
                "gaussian(sigma_sq=plugin)".into()
            }
        }
    }

    /// The method that is exact (or natural) for a noise law with known parameter.
    pub fn natural_for(noise: Noise) -> Self {
        match noise {
            Noise::Uniform { theta } => IntervalMethod::ExactUniform {
                theta: ParamSource::Known(theta),
            },
            Noise::Gaussian { sigma_sq } => IntervalMethod::Gaussian {
                sigma_sq: ParamSource::Known(sigma_sq),
            },
        }
    }
}

/// Reproducible description of a Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub x_spec: XSpec,
    pub beta0: f64,
    pub beta1: f64,
    pub noise: Noise,
    pub replicates: usize,
    pub seed: u64,
    /// Draw a new design for every replicate instead of sharing one.
    pub resample_x_each_replicate: bool,
    pub level: f64,
    pub interval: IntervalMethod,
    /// Cap on nonzero weights for exact intervals.
    #[serde(default = "default_exact_limit")]
    pub exact_limit: usize,
}

fn default_exact_limit() -> usize {
    crate::uniform_sum::DEFAULT_EXACT_LIMIT
}

impl SimConfig {
    /// Ten points drawn once from `U(-10, 10)`, `beta = (7, 4)`, errors
    /// `U(-3, 3)`, exact 95% intervals.
    pub fn reference(seed: u64, replicates: usize) -> Self {
        let noise = Noise::Uniform { theta: 3.0 };
        Self {
            n: 10,
            x_spec: XSpec::IidUniform { a: -10.0, b: 10.0 },
            beta0: 7.0,
            beta1: 4.0,
            noise,
            replicates,
            seed,
            resample_x_each_replicate: false,
            level: 0.95,
            interval: IntervalMethod::natural_for(noise),
            exact_limit: default_exact_limit(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidConfig(format!("n must be at least 3, got {}", self.n)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !self.beta0.is_finite() || !self.beta1.is_finite() {
            return Err(Error::InvalidConfig("true coefficients must be finite".into()));
        }
        if self.resample_x_each_replicate && matches!(self.x_spec, XSpec::Fixed { .. }) {
            return Err(Error::InvalidConfig("a fixed design cannot be resampled".into()));
        }
        self.x_spec.validate(self.n)?;
        self.noise.validate()
    }

    /// The shared design used when x is not resampled.
    pub fn design_x(&self) -> Vec<f64> {
        self.x_spec.design(self.n, self.seed)
    }
}

/// Per-replicate estimates and interval outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub beta0_hat: f64,
    pub beta1_hat: f64,
    pub theta_sq_hat: f64,
    pub sigma_sq_hat: f64,
    pub half_width_beta0: f64,
    pub half_width_beta1: f64,
    pub ci_covered_beta0: bool,
    pub ci_covered_beta1: bool,
}

impl ReplicateRecord {
    pub fn estimate(&self, coefficient: Coefficient) -> f64 {
        match coefficient {
            Coefficient::Intercept => self.beta0_hat,
            Coefficient::Slope => self.beta1_hat,
        }
    }
}

/// Output of [`run_replicates`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRun {
    pub config: SimConfig,
    pub records: Vec<ReplicateRecord>,
    /// Shared design, `None` when x was resampled.
    pub fixed_x: Option<Vec<f64>>,
    /// Resampled designs that came out collinear and were redrawn.
    pub regenerated: usize,
}

/// Summary statistics over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub replicates: usize,
    pub mean_beta0_hat: f64,
    pub mean_beta1_hat: f64,
    pub var_beta0_hat: f64,
    pub var_beta1_hat: f64,
    pub mean_theta_sq_hat: f64,
    pub mean_sigma_sq_hat: f64,
    pub corr_beta_hat: f64,
    pub coverage_beta0: f64,
    pub coverage_beta1: f64,
}

impl ReplicateRun {
    pub fn estimates(&self, coefficient: Coefficient) -> Vec<f64> {
        self.records.iter().map(|r| r.estimate(coefficient)).collect()
    }

    pub fn summary(&self) -> RunSummary {
        let n = self.records.len() as f64;
        let mean = |f: &dyn Fn(&ReplicateRecord) -> f64| -> f64 {
            crate::numeric::compensated_sum(self.records.iter().map(f)) / n
        };
        let m0 = mean(&|r| r.beta0_hat);
        let m1 = mean(&|r| r.beta1_hat);
        let denom = (n - 1.0).max(1.0);
        let cov = |f: &dyn Fn(&ReplicateRecord) -> f64, mf: f64, g: &dyn Fn(&ReplicateRecord) -> f64, mg: f64| {
            crate::numeric::compensated_sum(self.records.iter().map(|r| (f(r) - mf) * (g(r) - mg))) / denom
        };
        let v0 = cov(&|r| r.beta0_hat, m0, &|r| r.beta0_hat, m0);
        let v1 = cov(&|r| r.beta1_hat, m1, &|r| r.beta1_hat, m1);
        let c01 = cov(&|r| r.beta0_hat, m0, &|r| r.beta1_hat, m1);
        RunSummary {
            replicates: self.records.len(),
            mean_beta0_hat: m0,
            mean_beta1_hat: m1,
            var_beta0_hat: v0,
            var_beta1_hat: v1,
            mean_theta_sq_hat: mean(&|r| r.theta_sq_hat),
            mean_sigma_sq_hat: mean(&|r| r.sigma_sq_hat),
            corr_beta_hat: c01 / (v0 * v1).sqrt(),
            coverage_beta0: mean(&|r| r.ci_covered_beta0 as u8 as f64),
            coverage_beta1: mean(&|r| r.ci_covered_beta1 as u8 as f64),
        }
    }

    pub fn to_csv(&self) -> String {
        report::replicates_csv(self)
    }
}

/// Interval half-widths for one method on one design.
pub(crate) struct IntervalEngine {
    method: IntervalMethod,
    z: f64,
    /// Exact half-widths at `theta = 1`, per coefficient.
    unit_exact: [f64; 2],
    factors: [f64; 2],
}

impl IntervalEngine {
    pub(crate) fn new(
        method: IntervalMethod,
        level: f64,
        design: &DesignSummary,
        exact_limit: usize,
    ) -> Result<Self> {
        let mut unit_exact = [0.0; 2];
        if let IntervalMethod::ExactUniform { .. } = method {
            let opts = ExactOptions {
                limit: exact_limit,
                ..ExactOptions::default()
            };
            for (slot, coef) in unit_exact.iter_mut().zip(Coefficient::ALL) {
                *slot = law_for_with(design, 1.0, coef, 0.0, &opts)?.half_width(level)?;
            }
        }
        Ok(Self {
            method,
            z: normal::quantile(0.5 * (1.0 + level))?,
            unit_exact,
            factors: Coefficient::ALL.map(|c| c.variance_factor(design)),
        })
    }

    pub(crate) fn half_width(&self, coef: Coefficient, fit: &FitResult) -> f64 {
        let i = coef as usize;
        match self.method {
            IntervalMethod::ExactUniform { theta } => {
                let theta = match theta {
                    ParamSource::Known(t) => t,
                    ParamSource::Estimated => fit.theta_sq_hat.sqrt(),
                };
                theta * self.unit_exact[i]
            }
            IntervalMethod::Gaussian { sigma_sq } => {
                let s2 = match sigma_sq {
                    ParamSource::Known(s) => s,
                    ParamSource::Estimated => fit.sigma_sq_hat,
                };
                self.z * (s2 * self.factors[i]).sqrt()
            }
        }
    }
}

/// Draws replicate `index`'s design (if resampled) and responses.
///
/// Same `(config, index)` always gives a bitwise-identical dataset.
pub fn generate_dataset(config: &SimConfig, replicate_index: u64) -> Result<Dataset> {
    config.validate()?;
    let fixed = (!config.resample_x_each_replicate).then(|| config.design_x());
    generate(config, replicate_index, fixed.as_deref()).map(|(data, _)| data)
}

fn generate(config: &SimConfig, index: u64, fixed_x: Option<&[f64]>) -> Result<(Dataset, usize)> {
    let mut rng = stream_rng(config.seed, index);
    let mut regenerated = 0;
    let x = match fixed_x {
        Some(x) => x.to_vec(),
        None => {
            let (a, b) = match config.x_spec {
                XSpec::Equispaced { a, b } | XSpec::IidUniform { a, b } => (a, b),
                XSpec::Fixed { .. } => unreachable!("validated"),
            };
            loop {
                let x = match config.x_spec {
                    XSpec::Equispaced { .. } => equispaced(config.n, a, b),
                    _ => draw_uniform_x(&mut rng, config.n, a, b),
                };
                if summarize(&x).is_ok() {
                    break x;
                }
                regenerated += 1;
            }
        }
    };
    let sampler = config.noise.sampler();
    let y = x
        .iter()
        .map(|&xi| config.beta0 + config.beta1 * xi + sampler.draw(&mut rng))
        .collect();
    Ok((Dataset::new(x, y)?, regenerated))
}

/// Runs all replicates of `config`, in parallel when available.
pub fn run_replicates(config: &SimConfig) -> Result<ReplicateRun> {
    config.validate()?;
    let fixed_x = (!config.resample_x_each_replicate).then(|| config.design_x());
    let shared = match &fixed_x {
        Some(x) => {
            let design = summarize(x)?;
            let engine = IntervalEngine::new(config.interval, config.level, &design, config.exact_limit)?;
            Some((design, engine))
        }
        None => None,
    };

    let results = crate::par::map_range(config.replicates, |i| -> Result<(ReplicateRecord, usize)> {
        let (data, regenerated) = generate(config, i as u64, fixed_x.as_deref())?;
        let owned;
        let (design, engine) = match &shared {
            Some((d, e)) => (d, e),
            None => {
                let d = summarize(data.x())?;
                let e = IntervalEngine::new(config.interval, config.level, &d, config.exact_limit)?;
                owned = (d, e);
                (&owned.0, &owned.1)
            }
        };
        let fit = fit_with_design(&data, design);
        let h0 = engine.half_width(Coefficient::Intercept, &fit);
        let h1 = engine.half_width(Coefficient::Slope, &fit);
        Ok((
            ReplicateRecord {
                beta0_hat: fit.beta0_hat,
                beta1_hat: fit.beta1_hat,
                theta_sq_hat: fit.theta_sq_hat,
                sigma_sq_hat: fit.sigma_sq_hat,
                half_width_beta0: h0,
                half_width_beta1: h1,
                ci_covered_beta0: (fit.beta0_hat - config.beta0).abs() <= h0,
                ci_covered_beta1: (fit.beta1_hat - config.beta1).abs() <= h1,
            },
            regenerated,
        ))
    });

    let mut records = Vec::with_capacity(config.replicates);
    let mut regenerated = 0;
    for r in results {
        let (rec, regen) = r?;
        records.push(rec);
        regenerated += regen;
    }
    Ok(ReplicateRun {
        config: config.clone(),
        records,
        fixed_x,
        regenerated,
    })
}

/// Runs `f` with parallelism capped at `threads` (no cap for `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    #[cfg(feature = "parallel")]
    {
        if let Some(t) = threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            return Ok(pool.install(f));
        }
    }
    let _ = threads;
    Ok(f())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equispaced_spec() {
        let x = XSpec::Equispaced { a: -10.0, b: 10.0 }.design(10, 0);
        assert_eq!(x[0], -10.0);
        assert_eq!(x[9], 10.0);
        assert!((x[1] - x[0] - 20.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn uniform_noise_stays_in_support() {
        let cfg = SimConfig {
            x_spec: XSpec::Equispaced { a: 0.0, b: 1.0 },
            beta0: 0.0,
            beta1: 0.0,
            ..SimConfig::reference(11, 1)
        };
        for i in 0..50 {
            let data = generate_dataset(&cfg, i).unwrap();
            assert!(data.y().iter().all(|e| e.abs() <= 3.0));
        }
    }

    #[test]
    fn datasets_are_deterministic() {
        let cfg = SimConfig::reference(42, 1);
        let a = generate_dataset(&cfg, 0).unwrap();
        let b = generate_dataset(&cfg, 0).unwrap();
        let c = generate_dataset(&cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x(), c.x());
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn resampled_designs_differ() {
        let cfg = SimConfig {
            resample_x_each_replicate: true,
            ..SimConfig::reference(5, 1)
        };
        let a = generate_dataset(&cfg, 0).unwrap();
        let b = generate_dataset(&cfg, 1).unwrap();
        assert_ne!(a.x(), b.x());
    }

    #[test]
    fn vanishing_noise_recovers_truth() {
        let cfg = SimConfig {
            noise: Noise::Uniform { theta: 1e-9 },
            interval: IntervalMethod::natural_for(Noise::Uniform { theta: 1e-9 }),
            ..SimConfig::reference(1, 1)
        };
        let run = run_replicates(&cfg).unwrap();
        let r = run.records[0];
        assert!((r.beta0_hat - 7.0).abs() < 1e-8);
        assert!((r.beta1_hat - 4.0).abs() < 1e-8);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "equispaced:-10:10".parse::<XSpec>().unwrap(),
            XSpec::Equispaced { a: -10.0, b: 10.0 }
        );
        assert_eq!(
            "iid-uniform:-1.5:2".parse::<XSpec>().unwrap(),
            XSpec::IidUniform { a: -1.5, b: 2.0 }
        );
        assert_eq!(
            "fixed:1,2,3".parse::<XSpec>().unwrap(),
            XSpec::Fixed { values: vec![1.0, 2.0, 3.0] }
        );
        assert!("grid:1".parse::<XSpec>().is_err());
        assert_eq!("uniform:3".parse::<Noise>().unwrap(), Noise::Uniform { theta: 3.0 });
        assert_eq!("gaussian:2".parse::<Noise>().unwrap(), Noise::Gaussian { sigma_sq: 2.0 });
        assert!("uniform:0".parse::<Noise>().is_err());
    }

    #[test]
    fn config_validation() {
        let base = SimConfig::reference(0, 10);
        assert!(base.validate().is_ok());
        assert!(SimConfig { replicates: 0, ..base.clone() }.validate().is_err());
        assert!(SimConfig { n: 2, ..base.clone() }.validate().is_err());
        assert!(SimConfig {
            x_spec: XSpec::IidUniform { a: 1.0, b: 1.0 },
            ..base.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            x_spec: XSpec::Fixed { values: vec![1.0, 2.0] },
            ..base
        }
        .validate()
        .is_err());
    }
}
