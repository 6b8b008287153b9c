//! Finite-sample laws of the least-squares coefficients under uniform
//! errors, the intervals and tests built from them, and their Gaussian
//! large-sample counterparts.
//!
//! `beta_j_hat = beta_j + W_j / d` where `W_0 = sum p_k eps_k` and
//! `W_1 = sum p'_k eps_k`, so each law is a location-scale image of a
//! [`WeightedUniformSum`]: `f(x) = d * f_W(d (x - beta_j))`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::normal;
use crate::regression::{DesignSummary, FitResult};
use crate::uniform_sum::{ExactOptions, WeightedUniformSum};

/// Which regression coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coefficient {
    #[serde(rename = "beta0")]
    Intercept,
    #[serde(rename = "beta1")]
    Slope,
}

impl Coefficient {
    pub const ALL: [Coefficient; 2] = [Coefficient::Intercept, Coefficient::Slope];

    pub fn name(self) -> &'static str {
        match self {
            Coefficient::Intercept => "beta0",
            Coefficient::Slope => "beta1",
        }
    }

    /// Noise weights mapping `eps` to `d * (beta_hat - beta)`.
    pub fn weights(self, design: &DesignSummary) -> &[f64] {
        match self {
            Coefficient::Intercept => &design.p,
            Coefficient::Slope => &design.p_prime,
        }
    }

    pub fn estimate(self, fit: &FitResult) -> f64 {
        match self {
            Coefficient::Intercept => fit.beta0_hat,
            Coefficient::Slope => fit.beta1_hat,
        }
    }

    /// `S2 / d` or `n / d`: the estimator variance per unit error variance.
    pub fn variance_factor(self, design: &DesignSummary) -> f64 {
        match self {
            Coefficient::Intercept => design.s2 / design.d,
            Coefficient::Slope => design.n as f64 / design.d,
        }
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Coefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "beta0" | "b0" | "intercept" => Ok(Coefficient::Intercept),
            "beta1" | "b1" | "slope" => Ok(Coefficient::Slope),
            _ => Err(Error::domain(format!(
                "unknown coefficient `{s}` (expected beta0 or beta1)"
            ))),
        }
    }
}

/// Interval/test construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactUniform,
    GaussianAsymptotic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ExactUniform => "exact_uniform",
            Method::GaussianAsymptotic => "gaussian_asymptotic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exact law of one coefficient estimator: `center + scale * W`.
#[derive(Debug, Clone)]
pub struct EstimatorLaw {
    pub coefficient: Coefficient,
    pub center: f64,
    /// `1 / d`.
    pub scale: f64,
    pub core: WeightedUniformSum,
}

impl EstimatorLaw {
    pub fn density(&self, x: f64) -> f64 {
        self.core.density((x - self.center) / self.scale) / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.core.cdf((x - self.center) / self.scale)
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        Ok(self.center + self.scale * self.core.quantile(q)?)
    }

    pub fn density_many(&self, xs: &[f64]) -> Vec<f64> {
        let ts: Vec<f64> = xs.iter().map(|x| (x - self.center) / self.scale).collect();
        self.core
            .density_many(&ts)
            .into_iter()
            .map(|v| v / self.scale)
            .collect()
    }

    pub fn cdf_many(&self, xs: &[f64]) -> Vec<f64> {
        let ts: Vec<f64> = xs.iter().map(|x| (x - self.center) / self.scale).collect();
        self.core.cdf_many(&ts)
    }

    pub fn variance(&self) -> f64 {
        self.scale * self.scale * self.core.variance()
    }

    /// Half-width of the central interval with the given coverage.
    pub fn half_width(&self, level: f64) -> Result<f64> {
        check_level(level, "level")?;
        Ok(self.scale * self.core.quantile(0.5 * (1.0 + level))?)
    }

    /// `(lo, hi)` of the bounded support.
    pub fn support(&self) -> (f64, f64) {
        let h = self.scale * self.core.half_support();
        (self.center - h, self.center + h)
    }
}

/// Exact law of a coefficient estimator centred at `center`.
pub fn law_for(
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    center: f64,
) -> Result<EstimatorLaw> {
    law_for_with(design, theta, coefficient, center, &ExactOptions::default())
}

pub fn law_for_with(
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    center: f64,
    opts: &ExactOptions,
) -> Result<EstimatorLaw> {
    let core = WeightedUniformSum::with_options(coefficient.weights(design), theta, opts)?;
    Ok(EstimatorLaw {
        coefficient,
        center,
        scale: 1.0 / design.d,
        core,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: Method,
}

impl ConfidenceInterval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }
}

fn check_level(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must lie in (0, 1), got {v}")))
    }
}

/// Exact interval `[beta_hat - h, beta_hat + h]` under `U(-theta, theta)`
/// errors; covers the true coefficient with probability exactly `level`.
pub fn exact_confidence_interval(
    fit: &FitResult,
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    level: f64,
) -> Result<ConfidenceInterval> {
    exact_confidence_interval_with(fit, design, theta, coefficient, level, &ExactOptions::default())
}

pub fn exact_confidence_interval_with(
    fit: &FitResult,
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    level: f64,
    opts: &ExactOptions,
) -> Result<ConfidenceInterval> {
    check_level(level, "level")?;
    let law = law_for_with(design, theta, coefficient, 0.0, opts)?;
    let h = law.half_width(level)?;
    let est = coefficient.estimate(fit);
    Ok(ConfidenceInterval {
        lo: est - h,
        hi: est + h,
        level,
        method: Method::ExactUniform,
    })
}

/// Normal-theory interval `beta_hat -/+ z_{(1+level)/2} sigma sqrt(factor)`.
pub fn gaussian_confidence_interval(
    fit: &FitResult,
    design: &DesignSummary,
    sigma_sq: f64,
    coefficient: Coefficient,
    level: f64,
) -> Result<ConfidenceInterval> {
    check_level(level, "level")?;
    check_sigma_sq(sigma_sq)?;
    let z = normal::quantile(0.5 * (1.0 + level))?;
    let h = z * (sigma_sq * coefficient.variance_factor(design)).sqrt();
    let est = coefficient.estimate(fit);
    Ok(ConfidenceInterval {
        lo: est - h,
        hi: est + h,
        level,
        method: Method::GaussianAsymptotic,
    })
}

fn check_sigma_sq(sigma_sq: f64) -> Result<()> {
    if sigma_sq >= 0.0 && sigma_sq.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "sigma^2 must be finite and non-negative, got {sigma_sq}"
        )))
    }
}

/// Two-sided test of `H0: beta_j = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub coefficient: Coefficient,
    /// `|beta_j_hat|`.
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub method: Method,
}

/// Exact test: reject when `|beta_hat|` exceeds the `1 - alpha/2` quantile of
/// the centred law; `p = 2 P(W <= -d |beta_hat|)`.
pub fn exact_test(
    fit: &FitResult,
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    alpha: f64,
) -> Result<TestResult> {
    exact_test_with(fit, design, theta, coefficient, alpha, &ExactOptions::default())
}

pub fn exact_test_with(
    fit: &FitResult,
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    alpha: f64,
    opts: &ExactOptions,
) -> Result<TestResult> {
    check_level(alpha, "alpha")?;
    let law = law_for_with(design, theta, coefficient, 0.0, opts)?;
    let statistic = coefficient.estimate(fit).abs();
    let critical_value = law.half_width(1.0 - alpha)?;
    let p_value = (2.0 * law.core.cdf(-statistic / law.scale)).clamp(0.0f64, 1.0);
    Ok(TestResult {
        coefficient,
        statistic,
        critical_value,
        p_value,
        alpha,
        reject: statistic > critical_value,
        method: Method::ExactUniform,
    })
}

/// Normal-theory test with known `sigma^2`.
pub fn gaussian_test(
    fit: &FitResult,
    design: &DesignSummary,
    sigma_sq: f64,
    coefficient: Coefficient,
    alpha: f64,
) -> Result<TestResult> {
    check_level(alpha, "alpha")?;
    check_sigma_sq(sigma_sq)?;
    let sd = (sigma_sq * coefficient.variance_factor(design)).sqrt();
    let statistic = coefficient.estimate(fit).abs();
    let critical_value = normal::quantile(1.0 - 0.5 * alpha)? * sd;
    let p_value = if sd > 0.0 {
        (2.0 * normal::cdf(-statistic / sd)).clamp(0.0, 1.0)
    } else if statistic > 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(TestResult {
        coefficient,
        statistic,
        critical_value,
        p_value,
        alpha,
        reject: statistic > critical_value,
        method: Method::GaussianAsymptotic,
    })
}

/// Large-sample normal law of a coefficient estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalApprox {
    pub mean: f64,
    pub variance: f64,
}

impl NormalApprox {
    pub fn density(&self, x: f64) -> f64 {
        let sd = self.variance.sqrt();
        normal::pdf((x - self.mean) / sd) / sd
    }

    pub fn cdf(&self, x: f64) -> f64 {
        normal::cdf((x - self.mean) / self.variance.sqrt())
    }
}

/// Normal approximation with variance `(theta^2/3) * S2/d` (intercept) or
/// `(theta^2/3) * n/d` (slope).
pub fn normal_approx_law(
    design: &DesignSummary,
    theta: f64,
    coefficient: Coefficient,
    center: f64,
) -> NormalApprox {
    NormalApprox {
        mean: center,
        variance: theta * theta / 3.0 * coefficient.variance_factor(design),
    }
}

/// Quantities that must vanish for the normal approximation to hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltDiagnostics {
    /// `max |p_k| / sqrt(d S2)`.
    pub cond_beta0: f64,
    /// `max |p'_k| / sqrt(d n)`.
    pub cond_beta1: f64,
    /// `S1 / (n S2)`, needed for the joint limit.
    pub cond_joint: f64,
}

pub fn clt_diagnostics(design: &DesignSummary) -> CltDiagnostics {
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = design.n as f64;
    CltDiagnostics {
        cond_beta0: max_abs(&design.p) / (design.d * design.s2).sqrt(),
        cond_beta1: max_abs(&design.p_prime) / (design.d * n).sqrt(),
        cond_joint: design.s1 / (n * design.s2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::{summarize, FitResult};
    use approx::assert_relative_eq;

    fn fit_at(beta0: f64, beta1: f64) -> FitResult {
        FitResult {
            beta0_hat: beta0,
            beta1_hat: beta1,
            residuals: vec![],
            theta_sq_hat: 0.0,
            sigma_sq_hat: 0.0,
        }
    }

    #[test]
    fn law_density_at_centre() {
        let design = summarize(&[0.0, 1.0, 3.0, 4.5]).unwrap();
        let law = law_for(&design, 2.0, Coefficient::Intercept, 7.0).unwrap();
        assert_relative_eq!(
            law.density(7.0),
            design.d * law.core.density(0.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn slope_law_variance_on_symmetric_design() {
        let design = summarize(&[-1.0, 0.0, 1.0]).unwrap();
        let law = law_for(&design, 1.0, Coefficient::Slope, 0.0).unwrap();
        assert_eq!(law.core.eff_weights(), &[3.0, 3.0]);
        assert_relative_eq!(law.variance(), 1.0 / 6.0, max_relative = 1e-14);
        let approx = normal_approx_law(&design, 1.0, Coefficient::Slope, 0.0);
        assert_relative_eq!(approx.variance, 1.0 / 6.0, max_relative = 1e-14);
    }

    #[test]
    fn uniform_quantile_interval() {
        // x = (0, 1): d = 1, p = (1, 0), so the intercept law is U(-theta, theta)
        let design = DesignSummary {
            n: 2,
            s1: 1.0,
            s2: 1.0,
            d: 1.0,
            p: vec![1.0, 0.0],
            p_prime: vec![-1.0, 1.0],
        };
        let ci = exact_confidence_interval(&fit_at(0.0, 0.0), &design, 3.0, Coefficient::Intercept, 0.95)
            .unwrap();
        assert_relative_eq!(ci.half_width(), 2.85, epsilon = 1e-11);
        let wide = exact_confidence_interval(
            &fit_at(0.0, 0.0),
            &design,
            3.0,
            Coefficient::Intercept,
            1.0 - 1e-12,
        )
        .unwrap();
        assert!(wide.half_width() <= 3.0);
    }

    #[test]
    fn exact_test_edges() {
        let design = summarize(&[0.0, 1.0, 2.0, 4.0]).unwrap();
        let t = exact_test(&fit_at(0.0, 0.0), &design, 1.0, Coefficient::Slope, 0.05).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert!(!t.reject);

        let law = law_for(&design, 1.0, Coefficient::Slope, 0.0).unwrap();
        let edge = law.support().1;
        let t = exact_test(&fit_at(0.0, edge * 1.01), &design, 1.0, Coefficient::Slope, 0.05).unwrap();
        assert_eq!(t.p_value, 0.0);
        assert!(t.reject);
    }

    #[test]
    fn gaussian_interval_and_test() {
        let design = summarize(&[-1.0, 0.0, 1.0]).unwrap();
        let fit = fit_at(1.0, 2.0);
        let ci = gaussian_confidence_interval(&fit, &design, 3.0, Coefficient::Slope, 0.95).unwrap();
        // n/d = 3/6, sigma = sqrt(3)
        assert_relative_eq!(
            ci.half_width(),
            1.959_963_984_540_054 * (1.5f64).sqrt(),
            max_relative = 1e-12
        );
        let zero = gaussian_confidence_interval(&fit, &design, 0.0, Coefficient::Slope, 0.95).unwrap();
        assert_eq!((zero.lo, zero.hi), (2.0, 2.0));

        let t = gaussian_test(&fit, &design, 3.0, Coefficient::Slope, 0.05).unwrap();
        assert_eq!(t.reject, t.p_value < 0.05);
        assert_eq!(t.reject, !ci.contains(0.0));
    }

    #[test]
    fn diagnostics_two_point_and_symmetric() {
        let design = DesignSummary {
            n: 2,
            s1: 0.0,
            s2: 2.0,
            d: 4.0,
            p: vec![2.0, 2.0],
            p_prime: vec![-2.0, 2.0],
        };
        let diag = clt_diagnostics(&design);
        assert_relative_eq!(diag.cond_beta0, std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-15);
        assert_eq!(diag.cond_joint, 0.0);
    }

    #[test]
    fn bad_levels_rejected() {
        let design = summarize(&[0.0, 1.0, 2.0]).unwrap();
        let fit = fit_at(0.0, 0.0);
        assert!(exact_confidence_interval(&fit, &design, 1.0, Coefficient::Slope, 1.0).is_err());
        assert!(exact_test(&fit, &design, 1.0, Coefficient::Slope, 0.0).is_err());
        assert!(gaussian_confidence_interval(&fit, &design, -1.0, Coefficient::Slope, 0.9).is_err());
    }

    #[test]
    fn coefficient_parsing() {
        assert_eq!("beta0".parse::<Coefficient>().unwrap(), Coefficient::Intercept);
        assert_eq!("SLOPE".parse::<Coefficient>().unwrap(), Coefficient::Slope);
        assert!("gamma".parse::<Coefficient>().is_err());
    }
}
