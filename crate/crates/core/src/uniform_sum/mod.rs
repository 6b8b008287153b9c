//! Exact law of `W = sum_k w_k eps_k` with `eps_k` i.i.d. `U(-theta, theta)`.
//!
//! Each `w_k eps_k` is `U(-|w_k| theta, |w_k| theta)`, so only the absolute
//! values of the nonzero weights matter. Writing `W = 2U - A` with
//! `U = sum U_k`, `U_k ~ U(0, |w_k| theta)`, `A = theta sum |w_k|`, the
//! density follows from the generalized Irwin–Hall formula for `U`:
//!
//! ```text
//! f_W(t) = (1/2) f_U((t + A) / 2)
//! ```
//!
//! The series is evaluated on the lower half of the support only
//! (`f_W(t) = f_W(-t)`, `F_W(t) = 1 - F_W(-t)`), which keeps the number of
//! active terms and the cancellation between them small.

mod grid;
mod terms;

pub use grid::{grid_convolution_density, GridDensity};
pub use terms::{CombinationTermTable, Precision, TABLE_LIMIT};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, normal};
use terms::Series;

/// Default cap on the number of nonzero weights handled exactly.
pub const DEFAULT_EXACT_LIMIT: usize = 22;

/// Options for exact-mode construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    /// Maximum number of nonzero weights.
    pub limit: usize,
    pub precision: Precision,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            limit: DEFAULT_EXACT_LIMIT,
            precision: Precision::Auto,
        }
    }
}

/// Distribution of a weighted sum of symmetric uniforms.
#[derive(Debug, Clone)]
pub struct WeightedUniformSum {
    raw_weights: Vec<f64>,
    eff_weights: Vec<f64>,
    theta: f64,
    half_support: f64,
    weight_product: f64,
    precision: Precision,
    series: Series,
}

/// Builds the exact law, rejecting more than `limit` nonzero weights.
pub fn make_sum(weights: &[f64], theta: f64, limit: usize) -> Result<WeightedUniformSum> {
    WeightedUniformSum::with_options(
        weights,
        theta,
        &ExactOptions {
            limit,
            ..ExactOptions::default()
        },
    )
}

impl WeightedUniformSum {
    pub fn new(weights: &[f64], theta: f64) -> Result<Self> {
        Self::with_options(weights, theta, &ExactOptions::default())
    }

    pub fn with_options(weights: &[f64], theta: f64, opts: &ExactOptions) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!("theta must be positive, got {theta}")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("weights must be finite"));
        }
        let mut eff: Vec<f64> = weights
            .iter()
            .filter(|w| **w != 0.0)
            .map(|w| w.abs())
            .collect();
        if eff.is_empty() {
            return Err(Error::DegenerateSum);
        }
        if eff.len() > opts.limit {
            return Err(Error::ExactModeTooLarge {
                m: eff.len(),
                limit: opts.limit,
            });
        }
        eff.sort_by(f64::total_cmp);
        let half_support = theta * compensated_sum(eff.iter().copied());
        let weight_product = eff.iter().product();
        let series = Series::new(&eff);
        Ok(Self {
            raw_weights: weights.to_vec(),
            eff_weights: eff,
            theta,
            half_support,
            weight_product,
            precision: opts.precision,
            series,
        })
    }

    /// Same law, different accumulation arithmetic.
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn raw_weights(&self) -> &[f64] {
        &self.raw_weights
    }

    /// `|w_k|` for the nonzero weights, ascending.
    pub fn eff_weights(&self) -> &[f64] {
        &self.eff_weights
    }

    /// Number of nonzero weights.
    pub fn m(&self) -> usize {
        self.eff_weights.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `theta * sum |w_k|`; the support is `[-half_support, half_support]`.
    pub fn half_support(&self) -> f64 {
        self.half_support
    }

    /// Product of the effective weights.
    pub fn weight_product(&self) -> f64 {
        self.weight_product
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Materialised subset-sum table, `None` when the knots are streamed.
    pub fn term_table(&self) -> Option<CombinationTermTable> {
        let m = self.m();
        let log_pref = -std::f64::consts::LN_2
            - self.eff_weights.iter().map(|c| c.ln()).sum::<f64>()
            - m as f64 * self.theta.ln()
            - libm::lgamma(m as f64);
        self.series.table(log_pref)
    }

    /// Maps `t <= 0` to the normalised series argument in `[0, total/2]`.
    #[inline]
    fn series_arg(&self, t: f64) -> f64 {
        let half = 0.5 * self.series.total();
        (half + half * (t / self.half_support)).max(0.0)
    }

    #[inline]
    fn density_factor(&self) -> f64 {
        self.series.density_prefactor() * self.series.total() / (2.0 * self.half_support)
    }

    pub fn density(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        let t = -t.abs();
        if t <= -self.half_support {
            return 0.0;
        }
        let p = (self.m() - 1) as u32;
        let s = self.series.eval(self.series_arg(t), p, self.precision);
        (s * self.density_factor()).max(0.0)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if t == 0.0 {
            return 0.5;
        }
        let lower = self.lower_cdf(-t.abs());
        if t < 0.0 {
            lower
        } else {
            1.0 - lower
        }
    }

    /// CDF for `t <= 0`, clamped to `[0, 1/2]`.
    fn lower_cdf(&self, t: f64) -> f64 {
        if t <= -self.half_support {
            return 0.0;
        }
        let p = self.m() as u32;
        let s = self.series.eval(self.series_arg(t), p, self.precision);
        (s * self.series.cdf_prefactor()).clamp(0.0, 0.5)
    }

    /// Standard deviation of `W`.
    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `(theta^2 / 3) * sum w_k^2`.
    pub fn variance(&self) -> f64 {
        self.theta * self.theta / 3.0 * compensated_sum(self.eff_weights.iter().map(|w| w * w))
    }

    /// `t` with `cdf(t) = q`, antisymmetric in `q` about 1/2.
    ///
    /// Newton iterations on the analytic CDF inside a bisection bracket; a
    /// step leaving the bracket or failing to halve the residual falls back
    /// to bisection. The returned point is certified by a bracket of width
    /// at most `1e-12 * half_support`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!(
                "quantile level must lie in (0, 1), got {q}"
            )));
        }
        if q == 0.5 {
            return Ok(0.0);
        }
        if q > 0.5 {
            return Ok(-self.lower_quantile(1.0 - q));
        }
        Ok(self.lower_quantile(q))
    }

    fn lower_quantile(&self, q: f64) -> f64 {
        let hs = self.half_support;
        let half = 0.5 * self.series.total();
        let tol = 1e-12 * half;
        let dens_pref = self.series.density_prefactor();
        let cdf_pref = self.series.cdf_prefactor();
        let eval = |u: f64| {
            let (ds, cs) = self.series.eval_pair(u, self.precision);
            ((cs * cdf_pref).clamp(0.0, 0.5) - q, ds * dens_pref)
        };
        let to_t = |u: f64| (hs * (u / half - 1.0)).min(0.0);

        let (mut lo, mut hi) = (0.0, half);
        // normal starting point, kept strictly inside the bracket
        let guess = normal::quantile(q).map_or(-0.5 * hs, |z| z * self.std_dev());
        let mut u = self.series_arg(guess.clamp(-0.999 * hs, 0.0));
        if !(u > lo && u < hi) {
            u = 0.5 * half;
        }
        let mut last_resid = f64::INFINITY;
        for _ in 0..200 {
            let (g, dens) = eval(u);
            if g == 0.0 {
                return to_t(u);
            }
            if g < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= tol {
                break;
            }
            let newton = if dens > 1e-12 { u - g / dens } else { f64::NAN };
            let next = if newton > lo && newton < hi && g.abs() < 0.5 * last_resid {
                newton
            } else {
                0.5 * (lo + hi)
            };
            last_resid = g.abs();
            if (next - u).abs() <= 0.25 * tol {
                // certify with a bracket around the converged point
                let (a, b) = ((next - 0.5 * tol).max(lo), (next + 0.5 * tol).min(hi));
                let (ga, _) = eval(a);
                let (gb, _) = eval(b);
                if ga <= 0.0 && gb >= 0.0 {
                    lo = a;
                    hi = b;
                    break;
                }
                if ga > 0.0 {
                    hi = a;
                } else {
                    lo = b;
                }
                u = 0.5 * (lo + hi);
                last_resid = f64::INFINITY;
                continue;
            }
            u = next;
        }
        to_t(0.5 * (lo + hi))
    }

    /// Density at many points.
    pub fn density_many(&self, ts: &[f64]) -> Vec<f64> {
        let p = (self.m() - 1) as u32;
        let factor = self.density_factor();
        let args: Vec<f64> = ts.iter().map(|&t| self.series_arg(-t.abs())).collect();
        let vals = self.series.eval_many(&args, p, self.precision);
        ts.iter()
            .zip(vals)
            .map(|(&t, s)| {
                if t.is_nan() {
                    f64::NAN
                } else if t.abs() >= self.half_support {
                    0.0
                } else {
                    (s * factor).max(0.0)
                }
            })
            .collect()
    }

    /// CDF at many points.
    pub fn cdf_many(&self, ts: &[f64]) -> Vec<f64> {
        let p = self.m() as u32;
        let pref = self.series.cdf_prefactor();
        let args: Vec<f64> = ts.iter().map(|&t| self.series_arg(-t.abs())).collect();
        let vals = self.series.eval_many(&args, p, self.precision);
        ts.iter()
            .zip(vals)
            .map(|(&t, s)| {
                if t.is_nan() {
                    return f64::NAN;
                }
                if t == 0.0 {
                    return 0.5;
                }
                let lower = if t.abs() >= self.half_support {
                    0.0
                } else {
                    (s * pref).clamp(0.0, 0.5)
                };
                if t < 0.0 {
                    lower
                } else {
                    1.0 - lower
                }
            })
            .collect()
    }

    /// Quantiles at many levels.
    pub fn quantile_many(&self, qs: &[f64]) -> Result<Vec<f64>> {
        crate::par::map(qs, |&q| self.quantile(q)).into_iter().collect()
    }
}
