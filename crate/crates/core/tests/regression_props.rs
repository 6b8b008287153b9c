mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use uniform_lse::regression::{equispaced, fit, summarize, Dataset};

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

fn check_identities(x: &[f64]) -> Result<(), TestCaseError> {
    let s = summarize(x).unwrap();
    let n = x.len() as f64;
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let sum_abs = |v: &[f64]| v.iter().map(|a| a.abs()).sum::<f64>();
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let cross: f64 = s.p.iter().zip(&s.p_prime).map(|(a, b)| a * b).sum();
    let cross_abs: f64 = s.p.iter().zip(&s.p_prime).map(|(a, b)| (a * b).abs()).sum();

    // Tolerances are relative to the magnitude of what is being summed.
    prop_assert!(rel(sum(&s.p), s.d, sum_abs(&s.p).max(s.d)) <= 1e-10);
    prop_assert!(sum(&s.p_prime).abs() <= 1e-10 * sum_abs(&s.p_prime));
    prop_assert!(rel(sq(&s.p), s.d * s.s2, s.d * s.s2) <= 1e-10);
    prop_assert!(rel(sq(&s.p_prime), s.d * n, s.d * n) <= 1e-10);
    prop_assert!(rel(cross, -s.s1 * s.d, cross_abs) <= 1e-10);

    let mut pairs = 0.0;
    for (i, a) in x.iter().enumerate() {
        for b in &x[i + 1..] {
            pairs += (a - b) * (a - b);
        }
    }
    prop_assert!(rel(s.d, pairs, pairs) <= 1e-10);
    Ok(())
}

#[test]
fn design_identities_over_a_thousand_random_designs() {
    let mut rng = rng(1);
    for _ in 0..1000 {
        let n = rng.random_range(3..=60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        check_identities(&x).unwrap();
    }
}

#[test]
fn equispaced_design_matches_explicit_inverse() {
    let x = equispaced(10, -10.0, 10.0);
    let s = summarize(&x).unwrap();
    // (X^T X)^{-1} X^T by hand: X^T X = [[n, S1], [S1, S2]].
    let n = 10.0;
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let det = n * s2 - s1 * s1;
    let inv = [[s2 / det, -s1 / det], [-s1 / det, n / det]];
    for (k, &xk) in x.iter().enumerate() {
        let m0 = inv[0][0] + inv[0][1] * xk;
        let m1 = inv[1][0] + inv[1][1] * xk;
        assert!((s.p[k] / s.d - m0).abs() <= 1e-12, "row 0, col {k}");
        assert!((s.p_prime[k] / s.d - m1).abs() <= 1e-12, "row 1, col {k}");
    }
    assert!((s.d - det).abs() <= 1e-12 * det);
    // n * sum (x - mean)^2 = 10 * (20/9)^2 * sum_{k=0}^{9} (k - 4.5)^2
    assert!((s.d - 10.0 * 400.0 / 81.0 * 82.5).abs() <= 1e-10 * s.d);
}

#[test]
fn fit_agrees_with_normal_equations() {
    let mut rng = rng(3);
    for _ in 0..200 {
        let n = rng.random_range(3..=40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.3 * v + rng.random_range(-2.0..2.0)).collect();
        let (b0, b1) = normal_equations_fit(&x, &y);
        let f = fit(&Dataset::new(x.clone(), y.clone()).unwrap()).unwrap();
        assert!((f.beta0_hat - b0).abs() <= 1e-9 * (1.0 + b0.abs()));
        assert!((f.beta1_hat - b1).abs() <= 1e-9 * (1.0 + b1.abs()));

        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r_sum: f64 = f.residuals.iter().sum();
        let rx_sum: f64 = f.residuals.iter().zip(&x).map(|(r, v)| r * v).sum();
        assert!(r_sum.abs() <= 1e-9 * ynorm);
        assert!(rx_sum.abs() <= 1e-9 * ynorm * 20.0);
        assert_eq!(f.theta_sq_hat, 3.0 * f.sigma_sq_hat);
    }
}

proptest! {
    #[test]
    fn identities_hold_for_arbitrary_designs(x in prop::collection::vec(-1e3f64..1e3, 3..80)) {
        prop_assume!(summarize(&x).is_ok());
        check_identities(&x)?;
    }

    #[test]
    fn fit_is_location_scale_equivariant(
        x in prop::collection::vec(-50.0f64..50.0, 3..30),
        noise in prop::collection::vec(-3.0f64..3.0, 30),
        a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        b in -100.0f64..100.0,
    ) {
        prop_assume!(summarize(&x).is_ok());
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| 7.0 + 4.0 * v + e).collect();
        let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let f = fit(&Dataset::new(x.clone(), y).unwrap()).unwrap();
        let g = fit(&Dataset::new(x, ay).unwrap()).unwrap();
        let e0 = a * f.beta0_hat + b;
        let e1 = a * f.beta1_hat;
        prop_assert!((g.beta0_hat - e0).abs() <= 1e-10 * (e0.abs() + a.abs() * 50.0 * f.beta1_hat.abs() + 1.0));
        prop_assert!((g.beta1_hat - e1).abs() <= 1e-10 * (e1.abs() + 1.0));
    }
}
