//! Browser bindings. Every export takes plain values and returns a JSON
//! string, either the result or `{"error": "..."}`, so the page needs no
//! generated TypeScript types.

use serde_json::{json, Value};
use uniform_lse::law::{
    exact_confidence_interval_with, gaussian_confidence_interval, law_for_with, Coefficient,
};
use uniform_lse::regression::{fit, read_dataset, summarize};
use uniform_lse::simulation::{coverage_study, IntervalMethod, Noise, ParamSource, SimConfig, XSpec};
use uniform_lse::uniform_sum::{ExactOptions, WeightedUniformSum, DEFAULT_EXACT_LIMIT};
use wasm_bindgen::prelude::*;

/// Replicate cap for the in-page coverage run, which is single-threaded.
pub const MAX_DEMO_REPLICATES: usize = 50_000;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect()
}

/// Exact density of `sum w_k eps_k` with its normal approximation.
pub fn density_curve_value(weights: &str, theta: f64, points: usize) -> Result<Value, String> {
    let w = parse_list(weights)?;
    let law = WeightedUniformSum::with_options(&w, theta, &ExactOptions::default())
        .map_err(|e| e.to_string())?;
    let points = points.clamp(2, 4001);
    let h = law.half_support();
    let xs: Vec<f64> = (0..points)
        .map(|i| -h + 2.0 * h * i as f64 / (points - 1) as f64)
        .collect();
    let exact = law.density_many(&xs);
    let var = law.variance();
    let normal: Vec<f64> = xs
        .iter()
        .map(|x| (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
        .collect();
    Ok(json!({
        "m": law.m(),
        "half_support": h,
        "variance": var,
        "q975": law.quantile(0.975).map_err(|e| e.to_string())?,
        "x": xs,
        "exact": exact,
        "normal": normal,
    }))
}

/// Exact and Gaussian intervals for both coefficients of pasted `x,y` CSV.
/// A non-positive `theta` means: plug in the estimate from the residuals.
pub fn intervals_value(csv: &str, theta: f64, level: f64) -> Result<Value, String> {
    let data = read_dataset(csv.as_bytes()).map_err(|e| e.to_string())?;
    let design = summarize(data.x()).map_err(|e| e.to_string())?;
    let f = fit(&data).map_err(|e| e.to_string())?;
    let (theta, source) = if theta > 0.0 {
        (theta, "known")
    } else {
        (f.theta_sq_hat.sqrt(), "plugin")
    };
    if !(theta > 0.0) {
        return Err("the points lie exactly on a line; the plug-in theta is 0".into());
    }
    let opts = ExactOptions::default();
    let mut rows = Vec::new();
    for coef in Coefficient::ALL {
        let exact = match exact_confidence_interval_with(&f, &design, theta, coef, level, &opts) {
            Ok(ci) => json!({ "lo": ci.lo, "hi": ci.hi }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        let g = gaussian_confidence_interval(&f, &design, theta * theta / 3.0, coef, level)
            .map_err(|e| e.to_string())?;
        rows.push(json!({
            "coefficient": coef.name(),
            "estimate": coef.estimate(&f),
            "exact": exact,
            "gaussian": { "lo": g.lo, "hi": g.hi },
        }));
    }
    Ok(json!({
        "n": design.n,
        "beta0_hat": f.beta0_hat,
        "beta1_hat": f.beta1_hat,
        "theta_sq_hat": f.theta_sq_hat,
        "theta": theta,
        "scale_source": source,
        "level": level,
        "intervals": rows,
        "exact_limit": DEFAULT_EXACT_LIMIT,
    }))
}

/// Coverage of the exact, correct-variance Gaussian and mis-specified
/// Gaussian intervals under uniform noise on a fixed random design.
pub fn coverage_value(
    n: usize,
    replicates: usize,
    seed: u64,
    theta: f64,
    pitfall_sigma_sq: f64,
) -> Result<Value, String> {
    if replicates == 0 || replicates > MAX_DEMO_REPLICATES {
        return Err(format!("replicates must be between 1 and {MAX_DEMO_REPLICATES}"));
    }
    let noise = Noise::Uniform { theta };
    let config = SimConfig {
        n,
        x_spec: XSpec::IidUniform { a: -10.0, b: 10.0 },
        noise,
        replicates,
        interval: IntervalMethod::natural_for(noise),
        ..SimConfig::reference(seed, replicates)
    };
    let methods = [
        IntervalMethod::ExactUniform {
            theta: ParamSource::Known(theta),
        },
        IntervalMethod::Gaussian {
            sigma_sq: ParamSource::Known(theta * theta / 3.0),
        },
        IntervalMethod::Gaussian {
            sigma_sq: ParamSource::Known(pitfall_sigma_sq),
        },
    ];
    let report = coverage_study(&config, &[n], config.level, &methods).map_err(|e| e.to_string())?;
    let design = summarize(&config.design_x()).map_err(|e| e.to_string())?;
    let law = law_for_with(&design, theta, Coefficient::Slope, 0.0, &ExactOptions::default())
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "n": n,
        "replicates": replicates,
        "level": config.level,
        "slope_law_variance": law.variance(),
        "rows": report.rows.iter().map(|r| json!({
            "method": r.method,
            "coefficient": r.coefficient.name(),
            "coverage": r.coverage,
            "mean_half_width": r.mean_half_width,
        })).collect::<Vec<_>>(),
    }))
}

#[wasm_bindgen]
pub fn density_curve(weights: &str, theta: f64, points: usize) -> String {
    respond(density_curve_value(weights, theta, points))
}

#[wasm_bindgen]
pub fn intervals(csv: &str, theta: f64, level: f64) -> String {
    respond(intervals_value(csv, theta, level))
}

#[wasm_bindgen]
pub fn coverage(n: usize, replicates: usize, seed: u32, theta: f64, pitfall_sigma_sq: f64) -> String {
    respond(coverage_value(n, replicates, seed.into(), theta, pitfall_sigma_sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_equal_weights_give_the_triangle() {
        let v = density_curve_value("1, 1", 1.0, 5).unwrap();
        let f: Vec<f64> = serde_json::from_value(v["exact"].clone()).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.25, 0.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((v["q975"].as_f64().unwrap() - (2.0 - 0.2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn bad_input_becomes_an_error_object() {
        let s = density_curve("1, x", 1.0, 10);
        assert!(s.contains("\"error\""));
        let s = intervals("x,y\n1,2\n", 1.0, 0.95);
        assert!(s.contains("too few points"));
    }

    #[test]
    fn single_term_intercept_interval() {
        let v = intervals_value("x,y\n0,1\n1,2\n1,2.5\n", 3.0, 0.95).unwrap();
        let row = &v["intervals"][0];
        let h = 0.5 * (row["exact"]["hi"].as_f64().unwrap() - row["exact"]["lo"].as_f64().unwrap());
        assert!((h - 2.85).abs() < 1e-9);
        let p = intervals_value("x,y\n0,1\n1,2\n2,3.5\n3,3.9\n", 0.0, 0.9).unwrap();
        assert_eq!(p["scale_source"], "plugin");
    }

    #[test]
    fn coverage_demo_shows_the_pitfall() {
        let v = coverage_value(10, 4000, 3, 3.0, 1.0).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 6);
        let cov = |i: usize| rows[i]["coverage"].as_f64().unwrap();
        assert!((cov(0) - 0.95).abs() < 0.02);
        assert!(cov(4) < 0.8 && cov(5) < 0.8);
        assert!(coverage_value(10, 0, 3, 3.0, 1.0).is_err());
    }
}
