//! Simple linear regression: datasets, design summaries, least-squares fits
//! and the unbiased estimator of the squared error half-width.
//!
//! The estimator errors are linear in the noise,
//!
//! ```text
//! beta0_hat - beta0 = (1/d) * sum_k p_k  * eps_k,   p_k  = S2 - x_k * S1
//! beta1_hat - beta1 = (1/d) * sum_k p'_k * eps_k,   p'_k = n * x_k - S1
//! ```
//!
//! with `d = det(X'X) = n*S2 - S1^2 = (1/2) * sum_{i != j} (x_i - x_j)^2`,
//! so the design never needs the full `(X'X)^-1 X'` matrix.

mod csv;

pub use self::csv::{read_dataset, read_dataset_path};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, NeumaierSum};

/// Relative threshold below which `d` is treated as zero.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-14;

/// Paired covariate/response samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                x: x.len(),
                y: y.len(),
            });
        }
        if x.len() < 3 {
            return Err(Error::TooFewPoints { n: x.len() });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::domain("dataset contains non-finite values"));
        }
        if x.iter().all(|&v| v == x[0]) {
            return Err(Error::CollinearDesign { det: 0.0 });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Sums of the covariate and the noise-to-estimator weight vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignSummary {
    pub n: usize,
    /// Sum of x.
    pub s1: f64,
    /// Sum of x squared.
    pub s2: f64,
    /// det(X'X) = n*S2 - S1^2.
    pub d: f64,
    /// Intercept weights `S2 - x_k S1`.
    pub p: Vec<f64>,
    /// Slope weights `n x_k - S1`.
    pub p_prime: Vec<f64>,
}

impl DesignSummary {
    pub fn mean_x(&self) -> f64 {
        self.s1 / self.n as f64
    }
}

/// Computes the design summary of a covariate vector.
///
/// `d` is accumulated from centred values, `n * sum (x - mean)^2`, which is
/// algebraically `n*S2 - S1^2` but does not cancel when the x values are
/// large and closely spaced. The weights use the same centring:
/// `p_k = Q - n*mean*(x_k - mean)` and `p'_k = n*(x_k - mean)` with
/// `Q = sum (x - mean)^2`.
pub fn summarize(x: &[f64]) -> Result<DesignSummary> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints { n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("design contains non-finite values"));
    }
    let nf = n as f64;
    let s1 = compensated_sum(x.iter().copied());
    let s2 = compensated_sum(x.iter().map(|v| v * v));
    let mean = s1 / nf;
    // second pass corrects the rounding in the mean
    let resid_mean = compensated_sum(x.iter().map(|v| v - mean)) / nf;
    let mean = mean + resid_mean;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let q = compensated_sum(centred.iter().map(|c| c * c));
    let d = nf * q;
    if !(d > COLLINEARITY_TOLERANCE * nf * s2) {
        return Err(Error::CollinearDesign { det: d });
    }
    let p = centred.iter().map(|c| q - nf * mean * c).collect();
    let p_prime = centred.iter().map(|c| nf * c).collect();
    Ok(DesignSummary {
        n,
        s1,
        s2,
        d,
        p,
        p_prime,
    })
}

/// Least-squares fit together with both residual-variance conventions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta0_hat: f64,
    pub beta1_hat: f64,
    pub residuals: Vec<f64>,
    /// `3 ||y - yhat||^2 / (n - 2)`, unbiased for theta^2 under U(-theta, theta) noise.
    pub theta_sq_hat: f64,
    /// `||y - yhat||^2 / (n - 2)`, the Gaussian-convention variance estimate.
    pub sigma_sq_hat: f64,
}

/// Ordinary least squares for `y = beta0 + beta1 x + eps`.
pub fn fit(data: &Dataset) -> Result<FitResult> {
    let design = summarize(data.x())?;
    Ok(fit_with_design(data, &design))
}

/// Fit reusing a summary already computed for `data.x()`.
pub fn fit_with_design(data: &Dataset, design: &DesignSummary) -> FitResult {
    let nf = data.n() as f64;
    let x_mean = design.mean_x();
    let y_mean = compensated_sum(data.y().iter().copied()) / nf;
    let mut sxy = NeumaierSum::new();
    let mut sxx = NeumaierSum::new();
    for (&x, &y) in data.x().iter().zip(data.y()) {
        let cx = x - x_mean;
        sxy += cx * (y - y_mean);
        sxx += cx * cx;
    }
    let beta1_hat = sxy.value() / sxx.value();
    let beta0_hat = y_mean - beta1_hat * x_mean;
    let residuals: Vec<f64> = data
        .x()
        .iter()
        .zip(data.y())
        .map(|(&x, &y)| y - beta0_hat - beta1_hat * x)
        .collect();
    let rss = compensated_sum(residuals.iter().map(|r| r * r));
    let sigma_sq_hat = rss / (nf - 2.0);
    FitResult {
        beta0_hat,
        beta1_hat,
        residuals,
        theta_sq_hat: 3.0 * sigma_sq_hat,
        sigma_sq_hat,
    }
}

/// Unbiased estimator of theta^2: `3 ||r||^2 / (n - 2)`.
pub fn estimate_theta_sq(residuals: &[f64], n: usize) -> Result<f64> {
    if n <= 2 {
        return Err(Error::TooFewPoints { n });
    }
    let rss = compensated_sum(residuals.iter().map(|r| r * r));
    Ok(3.0 * rss / (n as f64 - 2.0))
}

/// Equispaced design `x_k = (b - a)(k - 1)/(n - 1) + a`, k = 1..n.
pub fn equispaced(n: usize, a: f64, b: f64) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| (b - a) * k as f64 / (n - 1) as f64 + a)
        .collect()
}
