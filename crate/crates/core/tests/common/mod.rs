//! Reference computations that share no code with the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nodes and weights of the 10-point Gauss–Legendre rule on [-1, 1].
const GL10: [(f64, f64); 5] = [
    (0.148_874_338_981_631_2, 0.295_524_224_714_752_9),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_4),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
];

/// 10-point Gauss–Legendre on `[a, b]`; exact for polynomials of degree <= 19.
pub fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in &GL10 {
        acc += w * (f(mid - half * x) + f(mid + half * x));
    }
    acc * half
}

/// Integral of `f` over `[a, b]`, splitting at `breaks` so each panel sees a
/// single polynomial piece.
pub fn piecewise_integral(f: &impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut acc = 0.0;
    let mut c = 0.0;
    for w in pts.windows(2) {
        let v = gauss_legendre(f, w[0], w[1]) - c;
        let t = acc + v;
        c = (t - acc) - v;
        acc = t;
    }
    acc
}

/// Breakpoints of `sum w_k eps_k`, `eps ~ U(-theta, theta)`: every
/// `theta * sum_k s_k |w_k|` with signs `s_k = -1, +1`, by brute force.
pub fn breakpoints(weights: &[f64], theta: f64) -> Vec<f64> {
    let w: Vec<f64> = weights.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    let mut out = Vec::with_capacity(1 << w.len());
    for mask in 0u32..(1 << w.len()) {
        let s: f64 = w
            .iter()
            .enumerate()
            .map(|(k, v)| if mask >> k & 1 == 1 { *v } else { -*v })
            .sum();
        out.push(theta * s);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Cardinal B-spline of order `m` (the Irwin–Hall density on `[0, m]`) by
/// the Cox–de Boor recurrence
/// `M_m(x) = (x M_{m-1}(x) + (m - x) M_{m-1}(x - 1)) / (m - 1)`.
pub fn irwin_hall_density(m: usize, x: f64) -> f64 {
    if m == 1 {
        return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
    }
    if x <= 0.0 || x >= m as f64 {
        return 0.0;
    }
    let k = m as f64;
    (x * irwin_hall_density(m - 1, x) + (k - x) * irwin_hall_density(m - 1, x - 1.0)) / (k - 1.0)
}

/// Textbook closed form `1/(m-1)! sum_{k <= x} (-1)^k C(m, k) (x - k)^(m-1)`,
/// in exact rational arithmetic for dyadic `x`.
pub fn irwin_hall_closed_form(m: usize, x: f64) -> f64 {
    if x <= 0.0 || x >= m as f64 {
        return 0.0;
    }
    // x = num / 2^10 exactly for the points used in the tests.
    let den: i128 = 1 << 10;
    let num = (x * den as f64).round() as i128;
    assert_eq!(num as f64 / den as f64, x, "x must be a multiple of 2^-10");
    let mut acc: i128 = 0;
    let mut binom: i128 = 1;
    let mut k = 0i128;
    while k * den < num && k <= m as i128 {
        let g = num - k * den;
        let sign = if k % 2 == 0 { 1 } else { -1 };
        acc += sign * binom * g.pow(m as u32 - 1);
        binom = binom * (m as i128 - k) / (k + 1);
        k += 1;
    }
    let fact: f64 = (1..m).map(|i| i as f64).product();
    acc as f64 / (den as f64).powi(m as i32 - 1) / fact
}

/// Density of `sum w_k eps_k` by the alternating sum over all `2^m` sign
/// patterns in the symmetric parametrisation:
/// `f(t) = 1/(2^m prod|w| theta^m (m-1)!) sum_s (prod s) (t + theta sum s_k |w_k|)_+^(m-1)`.
/// Plain f64; only for small m and moderate cancellation.
pub fn brute_force_density(weights: &[f64], theta: f64, t: f64) -> f64 {
    let w: Vec<f64> = weights.iter().filter(|v| **v != 0.0).map(|v| v.abs() * theta).collect();
    let m = w.len();
    let mut acc = 0.0;
    for mask in 0u32..(1 << m) {
        let mut shift = 0.0;
        let mut sign = 1.0;
        for (k, v) in w.iter().enumerate() {
            if mask >> k & 1 == 1 {
                shift -= v;
                sign = -sign;
            } else {
                shift += v;
            }
        }
        let g = t + shift;
        if g > 0.0 {
            acc += sign * g.powi(m as i32 - 1);
        }
    }
    let fact: f64 = (1..m).map(|i| i as f64).product();
    let prod: f64 = w.iter().map(|v| 2.0 * v).product();
    acc / (prod * fact)
}

/// Random weights in `[-5, 5]`, about a fifth of them zeroed, at least one
/// nonzero.
pub fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..m)
            .map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random_range(-5.0..5.0) })
            .collect();
        if w.iter().any(|v| v.abs() > 1e-3) && w.iter().all(|v| *v == 0.0 || v.abs() > 1e-3) {
            return w;
        }
    }
}

/// Least squares by solving the 2x2 normal equations with an explicit
/// inverse.
pub fn normal_equations_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    let b0 = (sxx * sy - sx * sxy) / det;
    let b1 = (-sx * sy + n * sxy) / det;
    (b0, b1)
}

/// Empirical `q`-quantile (type 7).
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
