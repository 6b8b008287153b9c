//! Exact finite-sample inference for simple linear regression with
//! uniformly distributed errors.
//!
//! Under `y_i = beta0 + beta1 x_i + eps_i` with `eps_i ~ U(-theta, theta)`
//! i.i.d., each least-squares coefficient is its true value plus a weighted
//! sum of the errors. The law of such a sum is a generalized Irwin–Hall
//! distribution, which this crate evaluates in closed form. On top of it sit
//! exact confidence intervals and tests, the Gaussian asymptotic
//! counterparts, and a seeded Monte Carlo engine to check both.
//!
//! - [`regression`]: datasets, design summaries, fits, `theta^2` estimator
//! - [`uniform_sum`]: density, CDF and quantiles of weighted uniform sums
//! - [`law`]: estimator laws, intervals, tests, CLT diagnostics
//! - [`simulation`]: replicate engine, KS checks, coverage and convergence studies
//!
//! ```
//! use uniform_lse::law::{exact_confidence_interval, Coefficient};
//! use uniform_lse::regression::{fit, summarize, Dataset};
//!
//! let x = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
//! let y = vec![-0.9, 3.2, 7.1, 10.8, 15.2];
//! let data = Dataset::new(x, y)?;
//! let design = summarize(data.x())?;
//! let fit = fit(&data)?;
//! let ci = exact_confidence_interval(&fit, &design, 0.5, Coefficient::Slope, 0.95)?;
//! assert!(ci.lo < fit.beta1_hat && fit.beta1_hat < ci.hi);
//! # Ok::<(), uniform_lse::Error>(())
//! ```

pub mod error;
pub mod law;
pub mod numeric;
mod par;
pub mod regression;
pub mod simulation;
pub mod uniform_sum;

pub use error::{Error, Result};
pub use law::{Coefficient, EstimatorLaw};
pub use regression::{Dataset, DesignSummary, FitResult};
pub use uniform_sum::WeightedUniformSum;
