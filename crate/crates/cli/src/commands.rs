use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde_json::{json, Value};
use uniform_lse::law::{
    clt_diagnostics, exact_confidence_interval_with, exact_test_with, gaussian_confidence_interval,
    gaussian_test, law_for_with, ConfidenceInterval, Method, TestResult,
};
use uniform_lse::regression::{fit, read_dataset, read_dataset_path, summarize, Dataset};
use uniform_lse::simulation::report::{fmt9, CONVERGENCE_HEADER};
use uniform_lse::simulation::{
    convergence_study, coverage_study, ks_against_exact, run_replicates, ConvergenceConfig,
    CoverageReport, IntervalMethod, Noise, ParamSource, SimConfig,
};
use uniform_lse::uniform_sum::ExactOptions;
use uniform_lse::{
    Coefficient, DesignSummary, Error, EstimatorLaw, FitResult, WeightedUniformSum,
};

use crate::args::*;
use crate::plot::{Chart, Series, Style};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "UNIFORM_LSE_THREADS";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn flags(message: impl Into<String>) -> Self {
        Self {
            code: 5,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } => 2,
            Error::TooFewPoints { .. }
            | Error::LengthMismatch { .. }
            | Error::CollinearDesign { .. }
            | Error::DegenerateSum => 3,
            Error::ExactModeTooLarge { .. } => 4,
            Error::GridTooCoarse { .. }
            | Error::MismatchedDesign
            | Error::Domain(_)
            | Error::InvalidConfig(_) => 5,
        };
        let mut message = e.to_string();
        if code == 4 {
            message.push_str(" (raise --exact-limit or pass --fallback-normal)");
        }
        Self { code, message }
    }
}

type Res<T> = Result<T, CliError>;

/// Runs a parsed command and returns what goes to stdout.
pub fn run(cli: Cli) -> Res<String> {
    let threads = thread_cap()?;
    uniform_lse::simulation::with_threads(threads, move || dispatch(cli.command))?
}

fn thread_cap() -> Res<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::flags(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(e) => Err(CliError::flags(format!("{THREADS_ENV}: {e}"))),
    }
}

fn dispatch(command: Command) -> Res<String> {
    match command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Density(a) => cmd_density(&a),
        Command::Ci(a) => cmd_ci(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Coverage(a) => cmd_coverage(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Convergence(a) => cmd_convergence(&a),
    }
}

fn load(path: &Path) -> Res<Dataset> {
    if path.as_os_str() == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| CliError::io(format!("reading stdin: {e}")))?;
        Ok(read_dataset(buf.as_slice())?)
    } else {
        Ok(read_dataset_path(path)?)
    }
}

fn to_json(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn save_plot(out: &OutputArgs, chart: impl FnOnce() -> Chart) -> Res<()> {
    if let Some(path) = &out.plot {
        std::fs::write(path, chart().render())
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn coef_name(c: Coefficient) -> &'static str {
    c.name()
}

fn exact_opts(limit: usize) -> ExactOptions {
    ExactOptions {
        limit,
        ..ExactOptions::default()
    }
}

fn check_positive(v: f64, flag: &str) -> Res<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::flags(format!("{flag} must be positive and finite, got {v}")))
    }
}

// ---------------------------------------------------------------- fit

fn cmd_fit(a: &FitArgs) -> Res<String> {
    let data = load(&a.input)?;
    let design = summarize(data.x())?;
    let f = fit(&data)?;
    save_plot(&a.out, || fit_chart(&data, &f))?;
    Ok(match a.out.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "fit",
            "n": design.n,
            "beta0_hat": f.beta0_hat,
            "beta1_hat": f.beta1_hat,
            "theta_sq_hat": f.theta_sq_hat,
            "sigma_sq_hat": f.sigma_sq_hat,
            "s1": design.s1,
            "s2": design.s2,
            "d": design.d,
        })),
        Format::Csv => format!(
            "n,beta0_hat,beta1_hat,theta_sq_hat,sigma_sq_hat,s1,s2,d\n{},{},{},{},{},{},{},{}\n",
            design.n,
            fmt9(f.beta0_hat),
            fmt9(f.beta1_hat),
            fmt9(f.theta_sq_hat),
            fmt9(f.sigma_sq_hat),
            fmt9(design.s1),
            fmt9(design.s2),
            fmt9(design.d)
        ),
    })
}

fn fit_chart(data: &Dataset, f: &FitResult) -> Chart {
    let pts: Vec<(f64, f64)> = data.x().iter().copied().zip(data.y().iter().copied()).collect();
    let lo = data.x().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.x().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let line = vec![
        (lo, f.beta0_hat + f.beta1_hat * lo),
        (hi, f.beta0_hat + f.beta1_hat * hi),
    ];
    Chart {
        title: "Least-squares fit".into(),
        x_label: "x".into(),
        y_label: "y".into(),
        series: vec![
            Series::new("data", pts, Style::Markers),
            Series::new("fitted line", line, Style::Line),
        ],
    }
}

// ---------------------------------------------------------------- density

/// The law being tabulated: exact when feasible, otherwise the normal
/// approximation if the user allowed it.
enum Tabulated {
    Exact(EstimatorLaw),
    Normal { mean: f64, variance: f64 },
}

fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    uniform_lse::numeric::normal::pdf((x - mean) / sd) / sd
}

fn grid(from: f64, to: f64, step: Option<f64>, points: usize) -> Res<Vec<f64>> {
    if !(from < to) || !from.is_finite() || !to.is_finite() {
        return Err(CliError::flags(format!("grid needs --from < --to, got [{from}, {to}]")));
    }
    match step {
        Some(h) => {
            check_positive(h, "--step")?;
            let count = ((to - from) / h + 1e-9).floor() as usize + 1;
            if count > 10_000_000 {
                return Err(CliError::flags("grid has more than 10^7 points"));
            }
            Ok((0..count).map(|i| from + i as f64 * h).collect())
        }
        None => {
            if points < 2 {
                return Err(CliError::flags("--points must be at least 2"));
            }
            let span = to - from;
            Ok((0..points)
                .map(|i| from + span * i as f64 / (points - 1) as f64)
                .collect())
        }
    }
}

fn density_theta(scale: &ScaleArgs, fit: Option<&FitResult>) -> Res<(f64, &'static str)> {
    if let Some(t) = scale.theta {
        return Ok((check_positive(t, "--theta")?, "known"));
    }
    if let Some(s) = scale.sigma_sq {
        return Ok(((3.0 * check_positive(s, "--sigma-sq")?).sqrt(), "known"));
    }
    // data without an explicit scale: plug in the estimate
    match fit {
        Some(f) => Ok((f.theta_sq_hat.sqrt(), "plugin")),
        None if scale.estimate_theta => Err(CliError::flags("--estimate-theta needs --input")),
        None => Ok((1.0, "default")),
    }
}

fn cmd_density(a: &DensityArgs) -> Res<String> {
    let coefficient: Coefficient = a.coefficient.into();
    let opts = exact_opts(a.exact.exact_limit);

    let (design, fitted) = if let Some(path) = &a.input {
        let data = load(path)?;
        let design = summarize(data.x())?;
        let f = fit(&data)?;
        (Some(design), Some(f))
    } else if let Some(spec) = &a.x_spec {
        let n = a.n.expect("clap requires --n with --x-spec");
        (Some(summarize(&spec.design(n, a.seed))?), None)
    } else if a.weights.is_none() {
        return Err(CliError::flags("give one of --input, --x-spec or --weights"));
    } else {
        (None, None)
    };

    let (theta, scale_source) = density_theta(&a.scale, fitted.as_ref())?;
    if !(theta > 0.0) {
        return Err(CliError::flags(
            "the plug-in theta is 0 (the data lie on a line), so the law is a point mass",
        ));
    }
    let center = a
        .center
        .unwrap_or_else(|| fitted.as_ref().map_or(0.0, |f| coefficient.estimate(f)));

    let built = match (&design, &a.weights) {
        (Some(d), _) => law_for_with(d, theta, coefficient, center, &opts),
        (None, Some(w)) => WeightedUniformSum::with_options(w, theta, &opts).map(|core| EstimatorLaw {
            coefficient,
            center,
            scale: 1.0,
            core,
        }),
        (None, None) => unreachable!(),
    };
    let normal_variance = |law_variance: Option<f64>| -> f64 {
        match (&design, &a.weights) {
            (Some(d), _) => theta * theta / 3.0 * coefficient.variance_factor(d),
            (None, Some(w)) => {
                law_variance.unwrap_or_else(|| theta * theta / 3.0 * w.iter().map(|v| v * v).sum::<f64>())
            }
            (None, None) => unreachable!(),
        }
    };
    let law = match built {
        Ok(law) => Tabulated::Exact(law),
        Err(e @ Error::ExactModeTooLarge { .. }) => {
            if !a.exact.fallback_normal {
                return Err(e.into());
            }
            Tabulated::Normal {
                mean: center,
                variance: normal_variance(None),
            }
        }
        Err(e) => return Err(e.into()),
    };

    let (m, support, nvar, method) = match &law {
        Tabulated::Exact(l) => (Some(l.core.m()), l.support(), l.variance(), "exact_uniform"),
        Tabulated::Normal { mean, variance } => {
            let h = 5.0 * variance.sqrt();
            (None, (mean - h, mean + h), *variance, "normal_approximation")
        }
    };
    if !(nvar > 0.0) {
        return Err(Error::DegenerateSum.into());
    }
    let from = a.from.unwrap_or(support.0);
    let to = a.to.unwrap_or(support.1);
    let xs = grid(from, to, a.step, a.points)?;
    let density = match &law {
        Tabulated::Exact(l) => l.density_many(&xs),
        Tabulated::Normal { mean, variance } => {
            xs.iter().map(|&x| normal_pdf(x, *mean, *variance)).collect()
        }
    };
    let overlay: Option<Vec<f64>> = a
        .overlay_normal
        .then(|| xs.iter().map(|&x| normal_pdf(x, center, nvar)).collect());

    save_plot(&a.out, || {
        let mut series = vec![Series::new(
            if method == "exact_uniform" { "exact density" } else { "normal approximation" },
            xs.iter().copied().zip(density.iter().copied()).collect(),
            Style::Line,
        )];
        if let Some(o) = &overlay {
            series.push(Series::new(
                "normal approximation",
                xs.iter().copied().zip(o.iter().copied()).collect(),
                Style::Dashed,
            ));
        }
        Chart {
            title: match design {
                Some(_) => format!("Density of {}", coef_name(coefficient)),
                None => "Density of the weighted uniform sum".into(),
            },
            x_label: "x".into(),
            y_label: "density".into(),
            series,
        }
    })?;

    Ok(match a.out.format {
        Format::Csv => {
            let mut out = String::from(if overlay.is_some() {
                "x,density,normal_density\n"
            } else {
                "x,density\n"
            });
            for (i, (&x, &f)) in xs.iter().zip(&density).enumerate() {
                let _ = write!(out, "{},{}", fmt9(x), fmt9(f));
                if let Some(o) = &overlay {
                    let _ = write!(out, ",{}", fmt9(o[i]));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "density",
                "mode": if a.weights.is_some() { "weights" } else { "coefficient" },
                "coefficient": if a.weights.is_some() { Value::Null } else { json!(coef_name(coefficient)) },
                "method": method,
                "theta": theta,
                "scale_source": scale_source,
                "center": center,
                "m": m,
                "support": [support.0, support.1],
                "normal_variance": nvar,
                "x": xs,
                "density": density,
            });
            if let Some(d) = &design {
                v["n"] = json!(d.n);
                v["d"] = json!(d.d);
            }
            if let Some(o) = overlay {
                v["normal_density"] = json!(o);
            }
            to_json(&v)
        }
    })
}

// ---------------------------------------------------------------- ci / test

/// Scale of the noise as used by one inference method.
struct Scale {
    /// theta for the exact method, sigma^2 for the Gaussian one.
    value: f64,
    source: &'static str,
}

fn resolve_scale(method: MethodArg, scale: &ScaleArgs, f: &FitResult) -> Res<Scale> {
    let known = |value| Ok(Scale { value, source: "known" });
    match method {
        MethodArg::ExactUniform => {
            if let Some(t) = scale.theta {
                known(check_positive(t, "--theta")?)
            } else if let Some(s) = scale.sigma_sq {
                known((3.0 * check_positive(s, "--sigma-sq")?).sqrt())
            } else if scale.estimate_theta {
                Ok(Scale {
                    value: f.theta_sq_hat.sqrt(),
                    source: "plugin",
                })
            } else {
                Err(CliError::flags(
                    "the exact method needs --theta, --sigma-sq or --estimate-theta",
                ))
            }
        }
        MethodArg::Gaussian => {
            if let Some(s) = scale.sigma_sq {
                known(check_positive(s, "--sigma-sq")?)
            } else if let Some(t) = scale.theta {
                known(check_positive(t, "--theta")?.powi(2) / 3.0)
            } else if scale.estimate_theta {
                Ok(Scale {
                    value: f.sigma_sq_hat,
                    source: "plugin",
                })
            } else {
                Err(CliError::flags(
                    "the gaussian method needs --sigma-sq, --theta or --estimate-theta",
                ))
            }
        }
    }
}

fn scale_json(method: MethodArg, s: &Scale) -> Value {
    match method {
        MethodArg::ExactUniform => json!({ "theta": s.value, "sigma_sq": s.value * s.value / 3.0 }),
        MethodArg::Gaussian => json!({ "theta": (3.0 * s.value).sqrt(), "sigma_sq": s.value }),
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::ExactUniform => Method::ExactUniform.name(),
        MethodArg::Gaussian => Method::GaussianAsymptotic.name(),
    }
}

/// Interval for one coefficient, falling back to the normal law when exact
/// mode is over the limit and the user allowed it. Returns the interval and
/// whether the fallback was used.
fn one_interval(
    method: MethodArg,
    scale: &Scale,
    f: &FitResult,
    design: &DesignSummary,
    coef: Coefficient,
    level: f64,
    exact: &ExactArgs,
) -> Res<(ConfidenceInterval, bool)> {
    match method {
        MethodArg::Gaussian => Ok((gaussian_confidence_interval(f, design, scale.value, coef, level)?, false)),
        MethodArg::ExactUniform => {
            if scale.value == 0.0 {
                // plug-in theta of a perfect fit: the law is a point mass
                let mut ci = gaussian_confidence_interval(f, design, 0.0, coef, level)?;
                ci.method = Method::ExactUniform;
                return Ok((ci, false));
            }
            match exact_confidence_interval_with(f, design, scale.value, coef, level, &exact_opts(exact.exact_limit)) {
                Ok(ci) => Ok((ci, false)),
                Err(Error::ExactModeTooLarge { .. }) if exact.fallback_normal => {
                    let s2 = scale.value * scale.value / 3.0;
                    Ok((gaussian_confidence_interval(f, design, s2, coef, level)?, true))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn one_test(
    method: MethodArg,
    scale: &Scale,
    f: &FitResult,
    design: &DesignSummary,
    coef: Coefficient,
    alpha: f64,
    exact: &ExactArgs,
) -> Res<(TestResult, bool)> {
    match method {
        MethodArg::Gaussian => Ok((gaussian_test(f, design, scale.value, coef, alpha)?, false)),
        MethodArg::ExactUniform => {
            if scale.value == 0.0 {
                // same decision rule as the point-mass interval above
                let mut t = gaussian_test(f, design, 0.0, coef, alpha)?;
                t.method = Method::ExactUniform;
                return Ok((t, false));
            }
            match exact_test_with(f, design, scale.value, coef, alpha, &exact_opts(exact.exact_limit)) {
                Ok(t) => Ok((t, false)),
                Err(Error::ExactModeTooLarge { .. }) if exact.fallback_normal => {
                    let s2 = scale.value * scale.value / 3.0;
                    Ok((gaussian_test(f, design, s2, coef, alpha)?, true))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn cmd_ci(a: &CiArgs) -> Res<String> {
    let data = load(&a.input)?;
    let design = summarize(data.x())?;
    let f = fit(&data)?;
    let scale = resolve_scale(a.method, &a.scale, &f)?;
    let mut rows = Vec::new();
    for coef in a.coefficient.list() {
        let (ci, fallback) = one_interval(a.method, &scale, &f, &design, coef, a.level, &a.exact)?;
        rows.push((coef, ci, fallback));
    }
    let approximate = scale.source == "plugin";

    save_plot(&a.out, || {
        let series = rows
            .iter()
            .enumerate()
            .map(|(i, (coef, ci, _))| {
                let y = (rows.len() - i) as f64;
                Series::new(
                    format!("{} ({})", coef_name(*coef), ci.method),
                    vec![(ci.lo, y), (coef.estimate(&f), y), (ci.hi, y)],
                    Style::Line,
                )
            })
            .collect();
        Chart {
            title: format!("{}% confidence intervals", a.level * 100.0),
            x_label: "coefficient value".into(),
            y_label: "".into(),
            series,
        }
    })?;

    Ok(match a.out.format {
        Format::Json => {
            let intervals: Vec<Value> = rows
                .iter()
                .map(|(coef, ci, fallback)| {
                    json!({
                        "coefficient": coef_name(*coef),
                        "estimate": coef.estimate(&f),
                        "method": ci.method.name(),
                        "lo": ci.lo,
                        "hi": ci.hi,
                        "half_width": ci.half_width(),
                        "fallback_normal": fallback,
                    })
                })
                .collect();
            to_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "ci",
                "n": design.n,
                "method": method_name(a.method),
                "level": a.level,
                "scale": scale_json(a.method, &scale),
                "scale_source": scale.source,
                "approximate": approximate,
                "beta0_hat": f.beta0_hat,
                "beta1_hat": f.beta1_hat,
                "theta_sq_hat": f.theta_sq_hat,
                "sigma_sq_hat": f.sigma_sq_hat,
                "intervals": intervals,
            }))
        }
        Format::Csv => {
            let mut out = String::from("coefficient,estimate,method,level,lo,hi,half_width,scale_source\n");
            for (coef, ci, _) in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    coef_name(*coef),
                    fmt9(coef.estimate(&f)),
                    ci.method.name(),
                    fmt9(a.level),
                    fmt9(ci.lo),
                    fmt9(ci.hi),
                    fmt9(ci.half_width()),
                    scale.source
                );
            }
            out
        }
    })
}

fn cmd_test(a: &TestArgs) -> Res<String> {
    let data = load(&a.input)?;
    let design = summarize(data.x())?;
    let f = fit(&data)?;
    let scale = resolve_scale(a.method, &a.scale, &f)?;
    let mut rows = Vec::new();
    for coef in a.coefficient.list() {
        let (t, fallback) = one_test(a.method, &scale, &f, &design, coef, a.alpha, &a.exact)?;
        rows.push((t, fallback));
    }

    save_plot(&a.out, || Chart {
        title: "Two-sided tests of beta_j = 0".into(),
        x_label: "coefficient index".into(),
        y_label: "value".into(),
        series: vec![
            Series::new(
                "|estimate|",
                rows.iter().enumerate().map(|(i, (t, _))| (i as f64, t.statistic)).collect(),
                Style::Markers,
            ),
            Series::new(
                "critical value",
                rows.iter().enumerate().map(|(i, (t, _))| (i as f64, t.critical_value)).collect(),
                Style::Bars(0.3),
            ),
        ],
    })?;

    Ok(match a.out.format {
        Format::Json => {
            let tests: Vec<Value> = rows
                .iter()
                .map(|(t, fallback)| {
                    json!({
                        "coefficient": coef_name(t.coefficient),
                        "estimate": t.coefficient.estimate(&f),
                        "method": t.method.name(),
                        "statistic": t.statistic,
                        "critical_value": t.critical_value,
                        "p_value": t.p_value,
                        "reject": t.reject,
                        "fallback_normal": fallback,
                    })
                })
                .collect();
            to_json(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": "test",
                "n": design.n,
                "method": method_name(a.method),
                "alpha": a.alpha,
                "level": 1.0 - a.alpha,
                "scale": scale_json(a.method, &scale),
                "scale_source": scale.source,
                "approximate": scale.source == "plugin",
                "beta0_hat": f.beta0_hat,
                "beta1_hat": f.beta1_hat,
                "tests": tests,
            }))
        }
        Format::Csv => {
            let mut out =
                String::from("coefficient,estimate,method,alpha,statistic,critical_value,p_value,reject,scale_source\n");
            for (t, _) in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    coef_name(t.coefficient),
                    fmt9(t.coefficient.estimate(&f)),
                    t.method.name(),
                    fmt9(a.alpha),
                    fmt9(t.statistic),
                    fmt9(t.critical_value),
                    fmt9(t.p_value),
                    t.reject,
                    scale.source
                );
            }
            out
        }
    })
}

// ---------------------------------------------------------------- simulate

fn base_config(n: usize, model: &ModelArgs, noise: Noise, exact_limit: usize) -> SimConfig {
    SimConfig {
        n,
        x_spec: model.x_spec.clone(),
        beta0: model.beta0,
        beta1: model.beta1,
        noise,
        replicates: model.replicates,
        seed: model.seed,
        resample_x_each_replicate: model.resample_x,
        level: model.level,
        interval: IntervalMethod::natural_for(noise),
        exact_limit,
    }
}

fn sim_interval(a: &SimulateArgs, noise: Noise) -> Res<IntervalMethod> {
    let s = &a.scale;
    let method = match a.method {
        None if s.theta.is_none() && s.sigma_sq.is_none() && !s.estimate_theta => {
            return Ok(IntervalMethod::natural_for(noise))
        }
        None => match noise {
            Noise::Uniform { .. } => MethodArg::ExactUniform,
            Noise::Gaussian { .. } => MethodArg::Gaussian,
        },
        Some(m) => m,
    };
    Ok(match method {
        MethodArg::ExactUniform => IntervalMethod::ExactUniform {
            theta: if s.estimate_theta {
                ParamSource::Estimated
            } else if let Some(t) = s.theta {
                ParamSource::Known(check_positive(t, "--theta")?)
            } else if let Some(v) = s.sigma_sq {
                ParamSource::Known((3.0 * check_positive(v, "--sigma-sq")?).sqrt())
            } else {
                ParamSource::Known(noise.equivalent_theta())
            },
        },
        MethodArg::Gaussian => IntervalMethod::Gaussian {
            sigma_sq: if s.estimate_theta {
                ParamSource::Estimated
            } else if let Some(v) = s.sigma_sq {
                ParamSource::Known(check_positive(v, "--sigma-sq")?)
            } else if let Some(t) = s.theta {
                ParamSource::Known(check_positive(t, "--theta")?.powi(2) / 3.0)
            } else {
                ParamSource::Known(noise.variance())
            },
        },
    })
}

/// Normal-law stand-in for an exact method that is over the limit.
fn gaussian_stand_in(method: IntervalMethod) -> IntervalMethod {
    match method {
        IntervalMethod::ExactUniform { theta } => IntervalMethod::Gaussian {
            sigma_sq: match theta {
                ParamSource::Known(t) => ParamSource::Known(t * t / 3.0),
                ParamSource::Estimated => ParamSource::Estimated,
            },
        },
        g => g,
    }
}

fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = values.len() as f64 * width;
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c as f64 / total))
        .collect()
}

fn cmd_simulate(a: &SimulateArgs) -> Res<String> {
    let noise: Noise = a.noise.parse()?;
    let mut config = base_config(a.n, &a.model, noise, a.exact.exact_limit);
    config.interval = sim_interval(a, noise)?;
    let mut fallback = false;
    if matches!(config.interval, IntervalMethod::ExactUniform { .. }) && a.n > a.exact.exact_limit {
        if !a.exact.fallback_normal {
            return Err(Error::ExactModeTooLarge {
                m: a.n,
                limit: a.exact.exact_limit,
            }
            .into());
        }
        config.interval = gaussian_stand_in(config.interval);
        fallback = true;
    }
    let run = run_replicates(&config)?;
    let coefficient: Coefficient = a.coefficient.into();
    let truth = match coefficient {
        Coefficient::Intercept => a.model.beta0,
        Coefficient::Slope => a.model.beta1,
    };
    // exact law of the plotted coefficient, when the run conditions on one design
    let exact_law = match &run.fixed_x {
        Some(x) => {
            let design = summarize(x)?;
            law_for_with(&design, noise.equivalent_theta(), coefficient, truth, &exact_opts(a.exact.exact_limit)).ok()
        }
        None => None,
    };

    save_plot(&a.out, || {
        let est = run.estimates(coefficient);
        let hist = histogram(&est, 60);
        let width = if hist.len() > 1 { hist[1].0 - hist[0].0 } else { 1.0 };
        let mut series = vec![Series::new("simulated", hist, Style::Bars(width))];
        if let Some(law) = &exact_law {
            let (lo, hi) = law.support();
            let xs: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
            let fs = law.density_many(&xs);
            series.push(Series::new("exact uniform law", xs.into_iter().zip(fs).collect(), Style::Line));
        }
        if let Some(x) = &run.fixed_x {
            if let Ok(design) = summarize(x) {
                let var = noise.variance() * coefficient.variance_factor(&design);
                let sd = var.sqrt();
                let xs: Vec<f64> = (0..=400).map(|i| truth - 4.0 * sd + 8.0 * sd * i as f64 / 400.0).collect();
                series.push(Series::new(
                    "normal law",
                    xs.iter().map(|&x| (x, normal_pdf(x, truth, var))).collect(),
                    Style::Dashed,
                ));
            }
        }
        Chart {
            title: format!("{} over {} replicates, n = {}, noise {}", coef_name(coefficient), run.records.len(), a.n, noise),
            x_label: coef_name(coefficient).into(),
            y_label: "density".into(),
            series,
        }
    })?;

    match a.out.format {
        Format::Csv => Ok(run.to_csv()),
        Format::Json => {
            let mut v = json!({
                "schema_version": SCHEMA_VERSION,
                "command": "simulate",
                "seed": config.seed,
                "n": config.n,
                "replicates": config.replicates,
                "noise": noise.to_string(),
                "method": config.interval.label(),
                "level": config.level,
                "fallback_normal": fallback,
                "config": serde_json::to_value(&config).expect("config serializes"),
                "fixed_x": run.fixed_x,
                "regenerated": run.regenerated,
                "summary": serde_json::to_value(run.summary()).expect("summary serializes"),
            });
            if a.ks {
                let law = exact_law.ok_or_else(|| {
                    CliError::from(if run.fixed_x.is_none() {
                        Error::MismatchedDesign
                    } else {
                        Error::ExactModeTooLarge {
                            m: a.n,
                            limit: a.exact.exact_limit,
                        }
                    })
                })?;
                let ks = ks_against_exact(&run, &law)?;
                v["ks"] = json!({
                    "statistic": ks.statistic,
                    "critical_value_05": ks.critical_value_05,
                    "sample_size": ks.sample_size,
                    "comparison": ks.comparison,
                    "passes": ks.passes(),
                });
            }
            Ok(to_json(&v))
        }
    }
}

// ---------------------------------------------------------------- coverage

fn cmd_coverage(a: &CoverageArgs) -> Res<String> {
    let theta = match (a.theta, a.sigma_sq) {
        (Some(t), _) => check_positive(t, "--theta")?,
        (None, Some(s)) => (3.0 * check_positive(s, "--sigma-sq")?).sqrt(),
        (None, None) => 3.0,
    };
    let sigma_sq = theta * theta / 3.0;
    check_positive(a.pitfall_sigma_sq, "--pitfall-sigma-sq")?;
    if a.n_list.is_empty() {
        return Err(CliError::flags("--n-list is empty"));
    }
    let families: Vec<Noise> = match a.noise {
        NoiseFamily::Uniform => vec![Noise::Uniform { theta }],
        NoiseFamily::Gaussian => vec![Noise::Gaussian { sigma_sq }],
        NoiseFamily::Both => vec![Noise::Uniform { theta }, Noise::Gaussian { sigma_sq }],
    };
    let exact_methods = [
        IntervalMethod::ExactUniform {
            theta: ParamSource::Known(theta),
        },
        IntervalMethod::ExactUniform {
            theta: ParamSource::Estimated,
        },
    ];
    let gaussian_methods = [
        IntervalMethod::Gaussian {
            sigma_sq: ParamSource::Known(sigma_sq),
        },
        IntervalMethod::Gaussian {
            sigma_sq: ParamSource::Estimated,
        },
        IntervalMethod::Gaussian {
            sigma_sq: ParamSource::Known(a.pitfall_sigma_sq),
        },
    ];
    let pitfall_label = gaussian_methods[2].label();

    let mut rows = Vec::new();
    for &noise in &families {
        for &n in &a.n_list {
            let mut methods = Vec::with_capacity(5);
            if n <= a.exact.exact_limit {
                methods.extend(exact_methods);
            } else if !a.exact.fallback_normal {
                return Err(Error::ExactModeTooLarge {
                    m: n,
                    limit: a.exact.exact_limit,
                }
                .into());
            }
            methods.extend(gaussian_methods);
            let base = base_config(n, &a.model, noise, a.exact.exact_limit);
            rows.extend(coverage_study(&base, &[n], a.model.level, &methods)?.rows);
        }
    }
    let report = CoverageReport { rows };

    save_plot(&a.out, || {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &report.rows {
            let k = (r.noise.clone(), r.method.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut series: Vec<Series> = keys
            .iter()
            .map(|(noise, method)| {
                let pts = report
                    .rows
                    .iter()
                    .filter(|r| &r.noise == noise && &r.method == method && r.coefficient == Coefficient::Slope)
                    .map(|r| (r.n as f64, r.coverage))
                    .collect();
                let style = if *method == pitfall_label { Style::Dashed } else { Style::Line };
                Series::new(format!("{noise} / {method}"), pts, style)
            })
            .collect();
        let (n0, n1) = (
            *a.n_list.iter().min().unwrap() as f64,
            *a.n_list.iter().max().unwrap() as f64,
        );
        series.push(Series::new("nominal", vec![(n0, a.model.level), (n1, a.model.level)], Style::Dashed));
        Chart {
            title: "Coverage of beta1 intervals".into(),
            x_label: "n".into(),
            y_label: "coverage".into(),
            series,
        }
    })?;

    Ok(match a.out.format {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "coverage",
            "seed": a.model.seed,
            "level": a.model.level,
            "replicates": a.model.replicates,
            "theta": theta,
            "sigma_sq": sigma_sq,
            "pitfall_sigma_sq": a.pitfall_sigma_sq,
            "x_spec": a.model.x_spec.to_string(),
            "resample_x": a.model.resample_x,
            "rows": serde_json::to_value(&report.rows).expect("rows serialize"),
        })),
    })
}

// ---------------------------------------------------------------- diagnose

fn cmd_diagnose(a: &DiagnoseArgs) -> Res<String> {
    let x = match (&a.input, &a.x_spec) {
        (Some(path), _) => load(path)?.x().to_vec(),
        (None, Some(spec)) => spec.design(a.n.expect("clap requires --n"), a.seed),
        (None, None) => return Err(CliError::flags("give --input or --x-spec with --n")),
    };
    let design = summarize(&x)?;
    let c = clt_diagnostics(&design);
    let n = design.n as f64;

    save_plot(&a.out, || {
        let norm0 = (design.d * design.s2).sqrt();
        let norm1 = (design.d * n).sqrt();
        Chart {
            title: format!("Normalised estimator weights, n = {}", design.n),
            x_label: "x".into(),
            y_label: "weight".into(),
            series: vec![
                Series::new(
                    "beta0: p_k / sqrt(d S2)",
                    x.iter().zip(&design.p).map(|(&xk, p)| (xk, p / norm0)).collect(),
                    Style::Markers,
                ),
                Series::new(
                    "beta1: p'_k / sqrt(d n)",
                    x.iter().zip(&design.p_prime).map(|(&xk, p)| (xk, p / norm1)).collect(),
                    Style::Markers,
                ),
            ],
        }
    })?;

    Ok(match a.out.format {
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "diagnose",
            "n": design.n,
            "s1": design.s1,
            "s2": design.s2,
            "d": design.d,
            "variance_factor_beta0": design.s2 / design.d,
            "variance_factor_beta1": n / design.d,
            "cond_beta0": c.cond_beta0,
            "cond_beta1": c.cond_beta1,
            "cond_joint": c.cond_joint,
        })),
        Format::Csv => format!(
            "n,s1,s2,d,cond_beta0,cond_beta1,cond_joint\n{},{},{},{},{},{},{}\n",
            design.n,
            fmt9(design.s1),
            fmt9(design.s2),
            fmt9(design.d),
            fmt9(c.cond_beta0),
            fmt9(c.cond_beta1),
            fmt9(c.cond_joint)
        ),
    })
}

// ---------------------------------------------------------------- convergence

fn cmd_convergence(a: &ConvergenceArgs) -> Res<String> {
    let config = ConvergenceConfig {
        x_spec: a.x_spec.clone(),
        n_list: a.n_list.clone(),
        theta: a.theta,
        seed: a.seed,
        grid_points: a.grid_points,
        exact_limit: a.exact_limit,
    };
    let rows = convergence_study(&config)?;

    save_plot(&a.out, || {
        let pick = |f: &dyn Fn(&uniform_lse::simulation::ConvergenceRow) -> f64| {
            rows.iter().map(|r| (r.n as f64, f(r))).collect::<Vec<_>>()
        };
        Chart {
            title: "Distance of the standardized exact law from N(0, theta^2/3)".into(),
            x_label: "n".into(),
            y_label: "value".into(),
            series: vec![
                Series::new("sup distance, beta0", pick(&|r| r.sup_distance_beta0), Style::Line),
                Series::new("sup distance, beta1", pick(&|r| r.sup_distance_beta1), Style::Line),
                Series::new("cond beta0", pick(&|r| r.cond_beta0), Style::Dashed),
                Series::new("cond beta1", pick(&|r| r.cond_beta1), Style::Dashed),
            ],
        }
    })?;

    Ok(match a.out.format {
        Format::Csv => uniform_lse::simulation::report::convergence_csv(&rows),
        Format::Json => to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "convergence",
            "seed": a.seed,
            "theta": a.theta,
            "x_spec": a.x_spec.to_string(),
            "columns": CONVERGENCE_HEADER.split(',').collect::<Vec<_>>(),
            "rows": serde_json::to_value(&rows).expect("rows serialize"),
        })),
    })
}
