//! CSV rendering of study outputs.

use std::fmt::Write;

use super::{ConvergenceRow, CoverageReport, ReplicateRun};

/// Value rounded to 9 significant digits, printed in shortest form
/// (scientific outside `[1e-6, 1e15)`).
pub fn fmt9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    let a = rounded.abs();
    if a != 0.0 && !(1e-6..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub const REPLICATE_HEADER: &str = "replicate,beta0_hat,beta1_hat,theta_sq_hat,sigma_sq_hat,half_width_beta0,half_width_beta1,ci_covered_beta0,ci_covered_beta1";
pub const COVERAGE_HEADER: &str = "n,noise,method,coefficient,level,coverage,mean_half_width,replicates";
pub const CONVERGENCE_HEADER: &str =
    "n,sup_distance_beta0,sup_distance_beta1,cond_beta0,cond_beta1,cond_joint";

pub fn replicates_csv(run: &ReplicateRun) -> String {
    let mut out = String::with_capacity(run.records.len() * 96);
    out.push_str(REPLICATE_HEADER);
    out.push('\n');
    for (i, r) in run.records.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{}",
            fmt9(r.beta0_hat),
            fmt9(r.beta1_hat),
            fmt9(r.theta_sq_hat),
            fmt9(r.sigma_sq_hat),
            fmt9(r.half_width_beta0),
            fmt9(r.half_width_beta1),
            r.ci_covered_beta0 as u8,
            r.ci_covered_beta1 as u8,
        );
    }
    out
}

pub fn coverage_csv(report: &CoverageReport) -> String {
    let mut out = String::new();
    out.push_str(COVERAGE_HEADER);
    out.push('\n');
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.n,
            row.noise,
            row.method,
            row.coefficient,
            fmt9(row.level),
            fmt9(row.coverage),
            fmt9(row.mean_half_width),
            row.replicates,
        );
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::new();
    out.push_str(CONVERGENCE_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.n,
            fmt9(row.sup_distance_beta0),
            fmt9(row.sup_distance_beta1),
            fmt9(row.cond_beta0),
            fmt9(row.cond_beta1),
            fmt9(row.cond_joint),
        );
    }
    out
}
