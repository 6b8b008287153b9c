use serde::Serialize;

use super::ReplicateRun;
use crate::error::{Error, Result};
use crate::law::EstimatorLaw;

/// One-sample Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    /// `sup_t |F_N(t) - F(t)|`.
    pub statistic: f64,
    pub sample_size: usize,
    pub comparison: String,
    /// Asymptotic 5% critical value `1.36 / sqrt(N)`.
    pub critical_value_05: f64,
}

impl KsReport {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical_value_05
    }
}

/// KS statistic of a sample already sorted ascending, given the reference
/// CDF at each sample point.
pub fn ks_statistic_sorted(sorted: &[f64], cdf_values: &[f64]) -> f64 {
    debug_assert_eq!(sorted.len(), cdf_values.len());
    let n = sorted.len() as f64;
    cdf_values
        .iter()
        .enumerate()
        .fold(0.0f64, |d, (i, &f)| {
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            d.max(above).max(below)
        })
}

/// KS statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values: Vec<f64> = sorted.iter().map(|&x| cdf(x)).collect();
    ks_statistic_sorted(&sorted, &values)
}

/// Compares the simulated estimates of `law.coefficient` with the exact law.
///
/// The exact law is conditional on the design, so runs with resampled x are
/// rejected.
pub fn ks_against_exact(run: &ReplicateRun, law: &EstimatorLaw) -> Result<KsReport> {
    if run.fixed_x.is_none() {
        return Err(Error::MismatchedDesign);
    }
    let mut sample = run.estimates(law.coefficient);
    sample.sort_by(f64::total_cmp);
    let cdf = law.cdf_many(&sample);
    let n = sample.len();
    Ok(KsReport {
        statistic: ks_statistic_sorted(&sample, &cdf),
        sample_size: n,
        comparison: format!(
            "{} vs exact law (center {}, theta {})",
            law.coefficient,
            law.center,
            law.core.theta()
        ),
        critical_value_05: 1.36 / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_grid_sample() {
        // points at the midpoints of N equal-probability cells: D = 1/(2N)
        let n = 100;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&sample, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-15);
    }

    #[test]
    fn shifted_sample() {
        let sample = vec![0.9; 10];
        let d = ks_statistic(&sample, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.9).abs() < 1e-15);
    }
}
