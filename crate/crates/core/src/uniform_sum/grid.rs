//! Independent numerical oracle: iterated convolution of box densities on a
//! uniform grid. Used to validate the closed-form series, never for
//! inference.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Density tabulated at `start + i * step`, `i = 0..values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridDensity {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.node(i), v))
    }

    /// Trapezoid rule over the whole table.
    pub fn trapezoid_integral(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let inner = compensated_sum(self.values[1..n - 1].iter().copied());
        self.step * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }
}

/// Density of `sum_k w_k eps_k`, `eps_k ~ U(-theta, theta)`, by repeated
/// box convolution.
///
/// The grid spans the support exactly with a spacing no larger than
/// `grid_step`, which must resolve the narrowest box with at least 8 cells.
/// The two narrowest boxes are convolved in closed form; each further box of
/// half-width `a` maps the current table `f` to
/// `(Q(t + a) - Q(t - a)) / (2a)`, where `Q` integrates the piecewise-linear
/// interpolant of `f` exactly.
pub fn grid_convolution_density(weights: &[f64], theta: f64, grid_step: f64) -> Result<GridDensity> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    let mut half_widths: Vec<f64> = weights
        .iter()
        .filter(|w| **w != 0.0)
        .map(|w| w.abs() * theta)
        .collect();
    if half_widths.is_empty() {
        return Err(Error::DegenerateSum);
    }
    half_widths.sort_by(f64::total_cmp);
    let max_step = half_widths[0] / 8.0;
    if !(grid_step > 0.0 && grid_step <= max_step) {
        return Err(Error::GridTooCoarse {
            step: grid_step,
            max_step,
        });
    }

    let support: f64 = half_widths.iter().sum();
    let cells = (2.0 * support / grid_step).ceil() as usize;
    let step = 2.0 * support / cells as f64;
    let start = -support;
    let nodes: Vec<f64> = (0..=cells).map(|i| start + i as f64 * step).collect();

    let a1 = half_widths[0];
    let box_cdf = |s: f64| ((s + a1) / (2.0 * a1)).clamp(0.0, 1.0);
    let mut values: Vec<f64> = match half_widths.get(1) {
        None => nodes
            .iter()
            .map(|t| if t.abs() <= a1 { 0.5 / a1 } else { 0.0 })
            .collect(),
        Some(&a2) => nodes
            .iter()
            .map(|&t| (box_cdf(t + a2) - box_cdf(t - a2)) / (2.0 * a2))
            .collect(),
    };

    for &a in half_widths.iter().skip(2) {
        let cumulative = cumulative_integral(&values, step);
        let q = |x: f64| -> f64 {
            let pos = (x - start) / step;
            if pos <= 0.0 {
                return 0.0;
            }
            let j = pos.floor() as usize;
            if j >= cells {
                return cumulative[cells];
            }
            let s = pos - j as f64;
            let (v0, v1) = (values[j], values[j + 1]);
            cumulative[j] + step * s * (v0 + 0.5 * (v1 - v0) * s)
        };
        values = nodes
            .iter()
            .map(|&t| ((q(t + a) - q(t - a)) / (2.0 * a)).max(0.0))
            .collect();
    }

    Ok(GridDensity {
        start,
        step,
        values,
    })
}

fn cumulative_integral(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    out.push(0.0);
    for w in values.windows(2) {
        let y = 0.5 * step * (w[0] + w[1]) - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        out.push(acc);
    }
    out
}
