use serde::{Deserialize, Serialize};

use super::XSpec;
use crate::error::{Error, Result};
use crate::law::{clt_diagnostics, law_for_with, Coefficient};
use crate::numeric::normal;
use crate::regression::{summarize, DesignSummary};
use crate::uniform_sum::ExactOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub x_spec: XSpec,
    pub n_list: Vec<usize>,
    pub theta: f64,
    /// Seed for random designs.
    pub seed: u64,
    /// Evaluation points across the standardized support.
    pub grid_points: usize,
    pub exact_limit: usize,
}

impl ConvergenceConfig {
    pub fn new(x_spec: XSpec, n_list: Vec<usize>, theta: f64) -> Self {
        Self {
            x_spec,
            n_list,
            theta,
            seed: 0,
            grid_points: 1000,
            exact_limit: crate::uniform_sum::DEFAULT_EXACT_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_distance_beta0: f64,
    pub sup_distance_beta1: f64,
    pub cond_beta0: f64,
    pub cond_beta1: f64,
    pub cond_joint: f64,
}

/// Distance of the exact standardized laws from their normal limit across
/// sample sizes, with the CLT condition quantities.
///
/// The standardized estimators are `sqrt(d/S2)(b0_hat - b0)` and
/// `sqrt(d/n)(b1_hat - b1)`, both with limit `N(0, theta^2/3)`. The sup
/// distance between CDFs is taken on an even grid over the exact support.
pub fn convergence_study(config: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if !(config.theta > 0.0) {
        return Err(Error::InvalidConfig("theta must be positive".into()));
    }
    if config.grid_points < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 points".into()));
    }
    let opts = ExactOptions {
        limit: config.exact_limit,
        ..ExactOptions::default()
    };
    config
        .n_list
        .iter()
        .map(|&n| {
            let x = config.x_spec.design(n, config.seed);
            let design = summarize(&x)?;
            let diag = clt_diagnostics(&design);
            let d0 = standardized_sup_distance(&design, config.theta, Coefficient::Intercept, config.grid_points, &opts)?;
            let d1 = standardized_sup_distance(&design, config.theta, Coefficient::Slope, config.grid_points, &opts)?;
            Ok(ConvergenceRow {
                n,
                sup_distance_beta0: d0,
                sup_distance_beta1: d1,
                cond_beta0: diag.cond_beta0,
                cond_beta1: diag.cond_beta1,
                cond_joint: diag.cond_joint,
            })
        })
        .collect()
}

/// `sup_z |P(Z <= z) - Phi(z / sigma)|` for the standardized estimator `Z`.
pub fn standardized_sup_distance(
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    grid_points: usize,
    opts: &ExactOptions,
) -> Result<f64> {
    let law = law_for_with(design, theta, coefficient, 0.0, opts)?;
    // Z = W / sqrt(d * F) with F = S2 or n
    let norm = (design.d * coefficient.variance_factor(design) * design.d).sqrt();
    let z_max = law.core.half_support() / norm;
    let sigma = theta / 3f64.sqrt();
    let zs: Vec<f64> = (0..grid_points)
        .map(|i| -z_max + 2.0 * z_max * i as f64 / (grid_points - 1) as f64)
        .collect();
    let ws: Vec<f64> = zs.iter().map(|z| z * norm).collect();
    let exact = law.core.cdf_many(&ws);
    Ok(zs
        .iter()
        .zip(exact)
        .map(|(&z, f)| (f - normal::cdf(z / sigma)).abs())
        .fold(0.0, f64::max))
}
