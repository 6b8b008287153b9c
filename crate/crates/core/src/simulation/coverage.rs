use serde::Serialize;

use super::rng::mix;
use super::{generate, IntervalEngine, IntervalMethod, SimConfig, XSpec};
use crate::error::{Error, Result};
use crate::law::Coefficient;
use crate::regression::{fit_with_design, summarize};

/// Empirical coverage of one (n, method, coefficient) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageRow {
    pub n: usize,
    pub noise: String,
    pub method: String,
    pub coefficient: Coefficient,
    pub level: f64,
    pub coverage: f64,
    pub mean_half_width: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn row(&self, n: usize, method: &str, coefficient: Coefficient) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.method == method && r.coefficient == coefficient)
    }

    pub fn to_csv(&self) -> String {
        super::report::coverage_csv(self)
    }
}

/// Coverage and mean half-width of each interval method across sample sizes.
///
/// Every method is evaluated on the same replicates. Each `n` gets its own
/// seed derived from `base.seed`, so adding sizes to `n_list` does not
/// change the rows of the others.
pub fn coverage_study(
    base: &SimConfig,
    n_list: &[usize],
    level: f64,
    methods: &[IntervalMethod],
) -> Result<CoverageReport> {
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no interval methods given".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        if matches!(base.x_spec, XSpec::Fixed { ref values } if values.len() != n) {
            return Err(Error::InvalidConfig(format!(
                "fixed design cannot be used for n = {n}"
            )));
        }
        let config = SimConfig {
            n,
            level,
            seed: mix(base.seed, n as u64),
            ..base.clone()
        };
        config.validate()?;
        let fixed_x = (!config.resample_x_each_replicate).then(|| config.design_x());
        let shared = match &fixed_x {
            Some(x) => {
                let design = summarize(x)?;
                let engines = methods
                    .iter()
                    .map(|&m| IntervalEngine::new(m, level, &design, config.exact_limit))
                    .collect::<Result<Vec<_>>>()?;
                Some((design, engines))
            }
            None => None,
        };

        // per replicate: for each (method, coefficient) -> (covered, half width)
        let per_rep = crate::par::map_range(config.replicates, |i| -> Result<Vec<(bool, f64)>> {
            let (data, _) = generate(&config, i as u64, fixed_x.as_deref())?;
            let owned;
            let (design, engines) = match &shared {
                Some((d, e)) => (d, e),
                None => {
                    let d = summarize(data.x())?;
                    let e = methods
                        .iter()
                        .map(|&m| IntervalEngine::new(m, level, &d, config.exact_limit))
                        .collect::<Result<Vec<_>>>()?;
                    owned = (d, e);
                    (&owned.0, &owned.1)
                }
            };
            let fit = fit_with_design(&data, design);
            let mut out = Vec::with_capacity(engines.len() * 2);
            for engine in engines {
                for coef in Coefficient::ALL {
                    let truth = match coef {
                        Coefficient::Intercept => config.beta0,
                        Coefficient::Slope => config.beta1,
                    };
                    let h = engine.half_width(coef, &fit);
                    out.push(((coef.estimate(&fit) - truth).abs() <= h, h));
                }
            }
            Ok(out)
        });
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

        let reps = config.replicates as f64;
        for (mi, method) in methods.iter().enumerate() {
            for (ci, coef) in Coefficient::ALL.into_iter().enumerate() {
                let slot = mi * 2 + ci;
                let covered = per_rep.iter().filter(|r| r[slot].0).count() as f64;
                let mean_h =
                    crate::numeric::compensated_sum(per_rep.iter().map(|r| r[slot].1)) / reps;
                rows.push(CoverageRow {
                    n,
                    noise: config.noise.to_string(),
                    method: method.label(),
                    coefficient: coef,
                    level,
                    coverage: covered / reps,
                    mean_half_width: mean_h,
                    replicates: config.replicates,
                });
            }
        }
    }
    Ok(CoverageReport { rows })
}
