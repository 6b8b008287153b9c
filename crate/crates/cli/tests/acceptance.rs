//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uniform_lse::law::{law_for, Coefficient};
use uniform_lse::regression::summarize;
use uniform_lse::simulation::{
    convergence_study, coverage_study, ks_against_exact, run_replicates, ConvergenceConfig,
    IntervalMethod, ParamSource, SimConfig, XSpec,
};
use uniform_lse::uniform_sum::{grid_convolution_density, WeightedUniformSum};

const THETA: f64 = 3.0;
const REPS: usize = 100_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..m)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random_range(-5.0..5.0) })
            .collect();
        if w.iter().any(|v| v.abs() > 1e-3) && w.iter().all(|v| *v == 0.0 || v.abs() > 1e-3) {
            return w;
        }
    }
}

fn fifty_vectors() -> Vec<(Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..50)
        .map(|_| {
            let m = rng.random_range(1..=10);
            (random_weights(&mut rng, m), rng.random_range(0.5..3.0))
        })
        .collect()
}

// 10-point Gauss-Legendre, exact on each polynomial piece of degree <= 19
const GL10: [(f64, f64); 5] = [
    (0.148_874_338_981_631_2, 0.295_524_224_714_752_9),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_4),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
];

fn integrate_pieces(f: impl Fn(f64) -> f64, knots: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for w in knots.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        let piece: f64 = GL10.iter().map(|&(x, wt)| wt * (f(mid - half * x) + f(mid + half * x))).sum::<f64>() * half;
        let y = piece - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// All points `theta * sum s_k |w_k|`, sorted.
fn knots(w: &[f64], theta: f64) -> Vec<f64> {
    let a: Vec<f64> = w.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    let mut out: Vec<f64> = (0u32..1 << a.len())
        .map(|mask| theta * a.iter().enumerate().map(|(k, v)| if mask >> k & 1 == 1 { *v } else { -*v }).sum::<f64>())
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn ac1() -> Outcome {
    let mut worst = 0.0f64;
    let mut oracle_drift = 0.0f64;
    for (w, theta) in fifty_vectors() {
        let law = WeightedUniformSum::new(&w, theta).unwrap();
        let min = w.iter().filter(|v| **v != 0.0).fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let total: f64 = w.iter().map(|v| v.abs()).sum();
        // fine enough that the oracle's own interpolation error is well below 1e-6
        let step = (theta * min / 32.0).min(theta * total / 16_000.0);
        let grid = grid_convolution_density(&w, theta, step).unwrap();
        let ts: Vec<f64> = (1..grid.len() - 1).map(|i| grid.node(i)).collect();
        let f = law.density_many(&ts);
        for (i, v) in f.iter().enumerate() {
            worst = worst.max((v - grid.values[i + 1]).abs());
        }
        // the same grid at half the spacing shares every other node
        let half = grid_convolution_density(&w, theta, 0.5 * grid.step).unwrap();
        if half.len() == 2 * grid.len() - 1 {
            for i in 1..grid.len() - 1 {
                oracle_drift = oracle_drift.max((grid.values[i] - half.values[2 * i]).abs());
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |exact - grid| = {worst:.2e} (oracle change on halving its step: {oracle_drift:.2e})"),
    )
}

fn ac2() -> Outcome {
    let mut worst_mass = 0.0f64;
    let mut worst_sym = 0.0f64;
    for (w, theta) in fifty_vectors() {
        let law = WeightedUniformSum::new(&w, theta).unwrap();
        let mass = integrate_pieces(|t| law.density(t), &knots(&w, theta));
        worst_mass = worst_mass.max((mass - 1.0).abs());
        let hs = law.half_support();
        for k in 0..=200 {
            let t = hs * k as f64 / 200.0;
            worst_sym = worst_sym.max((law.density(t) - law.density(-t)).abs());
        }
    }
    outcome(
        worst_mass <= 1e-8 && worst_sym == 0.0,
        format!("max |mass - 1| = {worst_mass:.2e}, max asymmetry = {worst_sym:.1e}"),
    )
}

/// `1/(m-1)! sum_{k <= x} (-1)^k C(m, k) (x - k)^(m-1)` in exact integer
/// arithmetic for `x` a multiple of 2^-10.
fn irwin_hall(m: usize, x: f64) -> f64 {
    if x <= 0.0 || x >= m as f64 {
        return 0.0;
    }
    let den: i128 = 1 << 10;
    let num = (x * den as f64) as i128;
    assert_eq!(num as f64 / den as f64, x);
    let (mut acc, mut binom, mut k) = (0i128, 1i128, 0i128);
    while k * den < num && k <= m as i128 {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        acc += sign * binom * (num - k * den).pow(m as u32 - 1);
        binom = binom * (m as i128 - k) / (k + 1);
        k += 1;
    }
    let fact: f64 = (1..m).map(|i| i as f64).product();
    acc as f64 / (den as f64).powi(m as i32 - 1) / fact
}

fn ac3() -> Outcome {
    let mut worst = 0.0f64;
    for m in 2..=8 {
        // sum of U(-1/2, 1/2) shifted by m/2 is the sum of U(0, 1)
        let law = WeightedUniformSum::new(&vec![1.0; m], 0.5).unwrap();
        for j in 0..100 {
            let x = ((j as f64 + 0.5) * m as f64 / 100.0 * 1024.0).round() / 1024.0;
            worst = worst.max((law.density(x - 0.5 * m as f64) - irwin_hall(m, x)).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max abs error = {worst:.2e} over m = 2..8"))
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(3..=60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let s = summarize(&x).unwrap();
        let nf = n as f64;
        let sum_abs = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>();
        let p: f64 = s.p.iter().sum();
        let pp: f64 = s.p_prime.iter().sum();
        let p2: f64 = s.p.iter().map(|v| v * v).sum();
        let pp2: f64 = s.p_prime.iter().map(|v| v * v).sum();
        let cross: f64 = s.p.iter().zip(&s.p_prime).map(|(a, b)| a * b).sum();
        let cross_abs: f64 = s.p.iter().zip(&s.p_prime).map(|(a, b)| (a * b).abs()).sum();
        // the reference d is the pairwise form, independent of the library's
        let mut d = 0.0;
        for (i, a) in x.iter().enumerate() {
            for b in &x[i + 1..] {
                d += (a - b) * (a - b);
            }
        }
        let s1: f64 = x.iter().sum();
        let s2: f64 = x.iter().map(|v| v * v).sum();
        let errs = [
            (p - d).abs() / sum_abs(&s.p).max(d),
            pp.abs() / sum_abs(&s.p_prime),
            (p2 - d * s2).abs() / (d * s2),
            (pp2 - d * nf).abs() / (d * nf),
            (cross + s1 * d).abs() / cross_abs,
            (s.d - d).abs() / d,
        ];
        worst = errs.iter().fold(worst, |m, e| m.max(*e));
    }
    outcome(worst <= 1e-10, format!("max relative error = {worst:.2e} over 1000 designs"))
}

fn ac5() -> Outcome {
    let run = run_replicates(&SimConfig::reference(42, REPS)).unwrap();
    let s = run.summary();
    let ok = |c: f64| (0.945..=0.955).contains(&c);
    outcome(
        ok(s.coverage_beta0) && ok(s.coverage_beta1),
        format!("coverage beta0 = {:.4}, beta1 = {:.4}", s.coverage_beta0, s.coverage_beta1),
    )
}

fn ac6() -> Outcome {
    let run = run_replicates(&SimConfig::reference(99, REPS)).unwrap();
    let design = summarize(run.fixed_x.as_ref().unwrap()).unwrap();
    let good = ks_against_exact(&run, &law_for(&design, THETA, Coefficient::Intercept, 7.0).unwrap()).unwrap();
    let bad = ks_against_exact(&run, &law_for(&design, 2.0 * THETA, Coefficient::Intercept, 7.0).unwrap()).unwrap();
    outcome(
        good.statistic <= 0.006 && bad.statistic >= 0.05,
        format!("D = {:.5}, doubled theta D = {:.4}", good.statistic, bad.statistic),
    )
}

fn ac7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [5usize, 10, 30] {
        let config = SimConfig {
            n,
            // the recorded interval is irrelevant here; exact mode stops at 22 weights
            interval: IntervalMethod::Gaussian {
                sigma_sq: ParamSource::Known(3.0),
            },
            ..SimConfig::reference(700 + n as u64, REPS)
        };
        let mean = run_replicates(&config).unwrap().summary().mean_theta_sq_hat;
        let ratio = mean / (THETA * THETA);
        pass &= (ratio - 1.0).abs() <= 0.02;
        parts.push(format!("n={n}: {ratio:.4}"));
    }
    outcome(pass, format!("mean theta_sq_hat / theta^2: {}", parts.join(", ")))
}

fn ac8() -> Outcome {
    let config = ConvergenceConfig::new(XSpec::Equispaced { a: -10.0, b: 10.0 }, vec![5, 8, 12, 16, 20], THETA);
    let rows = convergence_study(&config).unwrap();
    let dec = |f: &dyn Fn(usize) -> f64| (1..rows.len()).all(|i| f(i) < f(i - 1));
    let pass = dec(&|i| rows[i].sup_distance_beta1) && dec(&|i| rows[i].cond_beta0) && dec(&|i| rows[i].cond_beta1);
    let sups: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.sup_distance_beta1)).collect();
    outcome(pass, format!("beta1 sup distance {}", sups.join(" > ")))
}

fn ac9() -> Outcome {
    let config = SimConfig::reference(42, REPS);
    let design = summarize(&config.design_x()).unwrap();
    let z = 1.959_963_984_540_054;
    let mut worst = 0.0f64;
    for coef in Coefficient::ALL {
        let exact = law_for(&design, THETA, coef, 0.0).unwrap().half_width(0.95).unwrap();
        let gauss = z * (3.0 * coef.variance_factor(&design)).sqrt();
        worst = worst.max((exact - gauss).abs() / gauss);
    }
    let pitfall = IntervalMethod::Gaussian {
        sigma_sq: ParamSource::Known(1.0),
    };
    let report = coverage_study(&config, &[10], 0.95, &[pitfall]).unwrap();
    let cov: Vec<f64> = report.rows.iter().map(|r| r.coverage).collect();
    let below = cov.iter().all(|c| *c < 0.80);
    outcome(
        worst <= 0.10 && below,
        format!(
            "max relative half-width gap = {:.2}%, pitfall coverage = {:?}",
            100.0 * worst,
            cov.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn ac10() -> Outcome {
    let studies: [&[&str]; 3] = [
        &["simulate", "--seed", "42", "--replicates", "20000", "--format", "csv"],
        &["coverage", "--seed", "42", "--replicates", "5000", "--format", "csv"],
        &["convergence", "--seed", "42", "--format", "csv"],
    ];
    let exe = env!("CARGO_BIN_EXE_uniform-lse");
    let out = |args: &[&str], threads: Option<&str>| {
        let mut c = Command::new(exe);
        c.args(args);
        match threads {
            Some(t) => c.env("UNIFORM_LSE_THREADS", t),
            None => c.env_remove("UNIFORM_LSE_THREADS"),
        };
        let o = c.output().expect("binary runs");
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    let mut pass = true;
    for args in studies {
        let a = out(args, None);
        pass &= a == out(args, None) && a == out(args, Some("1")) && a == out(args, Some("4"));
    }
    outcome(pass, "simulate, coverage, convergence; default, 1 and 4 threads")
}

fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn ac11() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, budget) in [(10usize, Duration::from_millis(50)), (20, Duration::from_secs(10))] {
        let design = summarize(&XSpec::IidUniform { a: -10.0, b: 10.0 }.design(n, 42)).unwrap();
        let mut worst = Duration::ZERO;
        for coef in Coefficient::ALL {
            // construction counts towards the first batch
            let (law, build) = time(|| law_for(&design, THETA, coef, 0.0).unwrap());
            let (lo, hi) = law.support();
            let xs: Vec<f64> = (0..1000).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / 1000.0).collect();
            let qs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
            let (_, d) = time(|| law.density_many(&xs));
            let (_, c) = time(|| law.cdf_many(&xs));
            let (_, q) = time(|| law.core.quantile_many(&qs).unwrap());
            worst = worst.max(build + d).max(c).max(q);
        }
        pass &= worst <= budget;
        parts.push(format!("n={n}: slowest batch {:.1} ms", worst.as_secs_f64() * 1e3));
    }
    outcome(pass, parts.join(", "))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome, Duration); 11] = [
        ("AC1", "density vs grid convolution", ac1, Duration::from_secs(60)),
        ("AC2", "normalization and symmetry", ac2, Duration::from_secs(30)),
        ("AC3", "Irwin-Hall special case", ac3, Duration::MAX),
        ("AC4", "design identities", ac4, Duration::MAX),
        ("AC5", "exact CI coverage, n=10", ac5, Duration::from_secs(120)),
        ("AC6", "KS gate", ac6, Duration::MAX),
        ("AC7", "theta^2 estimator unbiased", ac7, Duration::MAX),
        ("AC8", "convergence trend", ac8, Duration::MAX),
        ("AC9", "exact vs Gaussian widths, sigma^2 pitfall", ac9, Duration::MAX),
        ("AC10", "byte-identical study output", ac10, Duration::MAX),
        ("AC11", "performance envelope", ac11, Duration::MAX),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let (o, took) = time(check);
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        failed += (!pass) as usize;
        let limit = if budget == Duration::MAX {
            String::new()
        } else {
            format!(", limit {} s", budget.as_secs())
        };
        println!(
            "[{}] {id} {name}: {} ({:.2} s{limit})",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
