//! The alternating subset-sum series behind the generalized Irwin–Hall law.
//!
//! For `U = sum_k U_k`, `U_k ~ U(0, r_k)`, the density and CDF are
//!
//! ```text
//! f_U(u) = 1/(prod r * (m-1)!) * sum_{A subset} (-1)^|A| (u - S_A)_+^(m-1)
//! F_U(u) = 1/(prod r * m!)     * sum_{A subset} (-1)^|A| (u - S_A)_+^m
//! ```
//!
//! Weights are normalised so that `sum r = 1` (up to rounding). Equal
//! weights are grouped, so a block of `j` identical weights contributes
//! `j + 1` knots with binomial multiplicities instead of `2^j` subsets.

use std::sync::OnceLock;

use crate::numeric::{DoubleDouble, NeumaierSum};

/// Largest number of knots kept in a materialised table (about 128 MiB).
/// Beyond this the subsets are streamed in Gray-code order on every
/// evaluation.
pub const TABLE_LIMIT: usize = 1 << 22;

/// Relative error bound above which a double-precision pass is repeated in
/// double-double. The bound is `(power + 2) * eps * max|term| / |sum|`.
pub(crate) const AUTO_TOLERANCE: f64 = 1e-12;

#[inline]
fn needs_dd(v: SeriesValue, power: u32) -> bool {
    v.magnitude * (power as f64 + 2.0) * f64::EPSILON > AUTO_TOLERANCE * v.value.abs()
}

/// Arithmetic used to accumulate the alternating series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Plain f64 terms with compensated accumulation.
    Double,
    /// Every term and the accumulator in double-double arithmetic.
    DoubleDouble,
    /// Expansion around precomputed double-double anchors, evaluated in
    /// double and repeated in double-double when the error bound is loose.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy)]
struct Knot {
    sum: DoubleDouble,
    /// `(-1)^size` times the number of subsets with this composition.
    coeff: f64,
    size: u32,
}

/// Subset sums of the effective weights, sorted ascending, with signed
/// multiplicities.
#[derive(Debug, Clone)]
pub struct CombinationTermTable {
    knots: Vec<Knot>,
    m: usize,
    scale: f64,
    log_prefactor: f64,
}

impl CombinationTermTable {
    /// Number of stored knots (at most `2^m`; fewer when weights repeat).
    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Sums over the `k`-subsets of the effective weights, as
    /// `(sum, number of subsets with that sum)` pairs in ascending order.
    pub fn sums_of_size(&self, k: usize) -> Vec<(f64, u64)> {
        self.knots
            .iter()
            .filter(|kn| kn.size as usize == k)
            .map(|kn| (kn.sum.to_f64() * self.scale, kn.coeff.abs() as u64))
            .collect()
    }

    /// Number of `k`-subsets represented, counting multiplicity.
    pub fn count_of_size(&self, k: usize) -> u64 {
        self.knots
            .iter()
            .filter(|kn| kn.size as usize == k)
            .map(|kn| kn.coeff.abs() as u64)
            .sum()
    }

    /// `(-1)^k`.
    pub fn sign(k: usize) -> f64 {
        if k % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Natural log of `1 / (2 P_m theta^m (m-1)!)` at `theta = 1`, the
    /// shared prefactor of the symmetric density in eff-weight units.
    pub fn log_prefactor(&self) -> f64 {
        self.log_prefactor
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Table {
        knots: Vec<Knot>,
        anchors: OnceLock<Anchors>,
    },
    Stream,
}

/// Evaluator for the normalised series.
#[derive(Debug, Clone)]
pub(crate) struct Series {
    /// Normalised weights, ascending.
    r: Vec<f64>,
    total: DoubleDouble,
    m: usize,
    density_prefactor: f64,
    engine: Engine,
    scale: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SeriesValue {
    pub value: f64,
    pub magnitude: f64,
}

impl Series {
    /// `eff` must be strictly positive and sorted ascending.
    pub(crate) fn new(eff: &[f64]) -> Self {
        let m = eff.len();
        let scale: f64 = eff.iter().sum();
        let r: Vec<f64> = eff.iter().map(|c| c / scale).collect();
        let total = r
            .iter()
            .fold(DoubleDouble::ZERO, |acc, &v| acc + DoubleDouble::from_f64(v));

        // 1 / (prod r * (m-1)!) interleaved to stay in range.
        let mut pref = 1.0;
        for (i, &ri) in r.iter().enumerate() {
            pref /= ri;
            if i > 0 {
                pref /= i as f64;
            }
        }

        let groups = group_equal(&r);
        let table_size = groups
            .iter()
            .try_fold(1usize, |acc, &(_, mult)| acc.checked_mul(mult + 1));
        let engine = match table_size {
            Some(size) if size <= TABLE_LIMIT => Engine::Table {
                knots: build_knots(&groups),
                anchors: OnceLock::new(),
            },
            _ => Engine::Stream,
        };
        Self {
            r,
            total,
            m,
            density_prefactor: pref,
            engine,
            scale,
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.total.to_f64()
    }

    pub(crate) fn density_prefactor(&self) -> f64 {
        self.density_prefactor
    }

    pub(crate) fn cdf_prefactor(&self) -> f64 {
        self.density_prefactor / self.m as f64
    }

    pub(crate) fn table(&self, log_prefactor: f64) -> Option<CombinationTermTable> {
        match &self.engine {
            Engine::Table { knots, .. } => Some(CombinationTermTable {
                knots: knots.clone(),
                m: self.m,
                scale: self.scale,
                log_prefactor,
            }),
            Engine::Stream => None,
        }
    }

    fn anchors(&self) -> Option<&Anchors> {
        match &self.engine {
            Engine::Table { knots, anchors } => {
                Some(anchors.get_or_init(|| Anchors::build(knots, self.m, self.total.hi * 0.5)))
            }
            Engine::Stream => None,
        }
    }

    /// `sum_A (-1)^|A| (u - S_A)_+^power` for a single `u` in `[0, total/2]`.
    pub(crate) fn eval(&self, u: f64, power: u32, precision: Precision) -> f64 {
        match &self.engine {
            Engine::Table { knots, .. } => match precision {
                Precision::Double => table_double(knots, u, power).value,
                Precision::DoubleDouble => table_dd(knots, u, power),
                Precision::Auto => {
                    let anchors = self.anchors().expect("table engine");
                    anchors.eval(knots, u, power)
                }
            },
            Engine::Stream => stream_dd(&self.r, &[u], power)[0],
        }
    }

    /// Density (power m-1) and CDF (power m) series at the same point.
    pub(crate) fn eval_pair(&self, u: f64, precision: Precision) -> (f64, f64) {
        let p = (self.m - 1) as u32;
        match &self.engine {
            Engine::Table { knots, .. } => match precision {
                Precision::DoubleDouble => (table_dd(knots, u, p), table_dd(knots, u, p + 1)),
                Precision::Double => {
                    let (dv, cv) = table_double_pair(knots, u, p);
                    (dv.value, cv.value)
                }
                Precision::Auto => {
                    let anchors = self.anchors().expect("table engine");
                    (anchors.eval(knots, u, p), anchors.eval(knots, u, p + 1))
                }
            },
            Engine::Stream => {
                let us = [u];
                (stream_dd(&self.r, &us, p)[0], stream_dd(&self.r, &us, p + 1)[0])
            }
        }
    }

    /// Batch evaluation. Points must lie in `[0, total/2]`.
    pub(crate) fn eval_many(&self, us: &[f64], power: u32, precision: Precision) -> Vec<f64> {
        match &self.engine {
            Engine::Table { .. } => {
                if precision == Precision::Auto {
                    self.anchors();
                }
                crate::par::map(us, |&u| self.eval(u, power, precision))
            }
            Engine::Stream => {
                let mut order: Vec<usize> = (0..us.len()).collect();
                order.sort_by(|&a, &b| us[a].total_cmp(&us[b]));
                let sorted: Vec<f64> = order.iter().map(|&i| us[i]).collect();
                let vals = stream_dd(&self.r, &sorted, power);
                let mut out = vec![0.0; us.len()];
                for (pos, &i) in order.iter().enumerate() {
                    out[i] = vals[pos];
                }
                out
            }
        }
    }
}

/// Knots folded into each anchor's moments.
const ANCHOR_STRIDE: usize = 32;

/// Power sums `M_k(a) = sum_{S < a} c_S (a - S)^k`, `k = 0..=m`, kept in
/// double-double at anchors spaced every `ANCHOR_STRIDE` knots.
///
/// Far from the origin the alternating terms `(u - S)^p` are huge next to
/// their sum. Re-expanding around a nearby anchor `a`,
/// `sum_{S < a} c_S (u - S)^p = sum_i C(p, i) (u - a)^(p-i) M_i(a)`,
/// leaves only small terms for the double-precision pass, and the few
/// knots between `a` and `u` are added directly.
#[derive(Debug, Clone)]
struct Anchors {
    at: Vec<DoubleDouble>,
    /// Index of the first knot not folded into the anchor's moments.
    first: Vec<usize>,
    /// `m + 1` moments per anchor.
    moments: Vec<DoubleDouble>,
    /// Pascal triangle, row-major with stride `m + 1`.
    binom: Vec<DoubleDouble>,
    m: usize,
}

impl Anchors {
    fn build(knots: &[Knot], m: usize, half: f64) -> Self {
        let w = m + 1;
        let mut binom = vec![DoubleDouble::ZERO; w * w];
        for k in 0..=m {
            binom[k * w] = DoubleDouble::ONE;
            for i in 1..=k {
                binom[k * w + i] = binom[(k - 1) * w + i - 1] + binom[(k - 1) * w + i];
            }
        }

        let mut at = vec![DoubleDouble::ZERO];
        let mut first = vec![0usize];
        let mut moments = vec![DoubleDouble::ZERO; w];
        let mut cur = vec![DoubleDouble::ZERO; w];
        let mut shifted = vec![DoubleDouble::ZERO; w];
        let mut powers = vec![DoubleDouble::ONE; w];
        let mut idx = ANCHOR_STRIDE;
        while idx < knots.len() && knots[idx].sum.hi <= half {
            let a = knots[idx].sum;
            let prev_a = *at.last().unwrap();
            let h = a - prev_a;
            // shift M_k from prev_a to a
            for p in 1..w {
                powers[p] = powers[p - 1] * h;
            }
            for k in 0..w {
                let mut acc = DoubleDouble::ZERO;
                for i in 0..=k {
                    acc += binom[k * w + i] * powers[k - i] * cur[i];
                }
                shifted[k] = acc;
            }
            std::mem::swap(&mut cur, &mut shifted);
            let start = *first.last().unwrap();
            for kn in &knots[start..idx] {
                let g = a - kn.sum;
                let mut gp = DoubleDouble::from_f64(kn.coeff);
                for slot in cur.iter_mut() {
                    *slot += gp;
                    gp = gp * g;
                }
            }
            at.push(a);
            first.push(idx);
            moments.extend_from_slice(&cur);
            idx += ANCHOR_STRIDE;
        }
        Self {
            at,
            first,
            moments,
            binom,
            m,
        }
    }

    fn locate(&self, u: f64) -> usize {
        self.at.partition_point(|&a| gap(u, a) >= 0.0).max(1) - 1
    }

    fn eval(&self, knots: &[Knot], u: f64, power: u32) -> f64 {
        let j = self.locate(u);
        let w = self.m + 1;
        let p = power as usize;
        let mom = &self.moments[j * w..j * w + w];
        let row = &self.binom[p * w..p * w + w];
        let d = gap(u, self.at[j]);

        let mut acc = NeumaierSum::new();
        let mut magnitude = 0.0f64;
        let mut dp = 1.0;
        for i in (0..=p).rev() {
            let term = row[i].hi * dp * mom[i].hi;
            magnitude = magnitude.max(term.abs());
            acc += term;
            dp *= d;
        }
        for kn in &knots[self.first[j]..] {
            let g = gap(u, kn.sum);
            if g <= 0.0 {
                break;
            }
            let term = kn.coeff * g.powi(p as i32);
            magnitude = magnitude.max(term.abs());
            acc += term;
        }
        let v = SeriesValue {
            value: acc.value(),
            magnitude,
        };
        if !needs_dd(v, power) {
            return v.value;
        }

        let udd = DoubleDouble::from_f64(u);
        let d = udd - self.at[j];
        let mut acc = DoubleDouble::ZERO;
        let mut dp = DoubleDouble::ONE;
        for i in (0..=p).rev() {
            acc += row[i] * dp * mom[i];
            dp = dp * d;
        }
        for kn in &knots[self.first[j]..] {
            let g = udd - kn.sum;
            if !g.is_sign_positive_nonzero() {
                break;
            }
            acc += g.powi(power).mul_f64(kn.coeff);
        }
        acc.to_f64()
    }
}

fn group_equal(r: &[f64]) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &v in r {
        match groups.last_mut() {
            Some((w, mult)) if *w == v => *mult += 1,
            _ => groups.push((v, 1)),
        }
    }
    groups
}

fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for k in 1..n {
        row[k] = row[k - 1] * (n - k + 1) as f64 / k as f64;
        row[k] = row[k].round();
    }
    row
}

fn build_knots(groups: &[(f64, usize)]) -> Vec<Knot> {
    let mut knots = vec![Knot {
        sum: DoubleDouble::ZERO,
        coeff: 1.0,
        size: 0,
    }];
    for &(w, mult) in groups {
        let binom = binomial_row(mult);
        let mut next = Vec::with_capacity(knots.len() * (mult + 1));
        for kn in &knots {
            for (c, &b) in binom.iter().enumerate() {
                let shift = DoubleDouble::from_f64(w).mul_f64(c as f64);
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                next.push(Knot {
                    sum: kn.sum + shift,
                    coeff: kn.coeff * b * sign,
                    size: kn.size + c as u32,
                });
            }
        }
        knots = next;
    }
    knots.sort_by(|a, b| {
        a.sum
            .hi
            .total_cmp(&b.sum.hi)
            .then(a.sum.lo.total_cmp(&b.sum.lo))
    });
    knots
}

#[inline]
fn gap(u: f64, s: DoubleDouble) -> f64 {
    (u - s.hi) - s.lo
}

fn table_double(knots: &[Knot], u: f64, power: u32) -> SeriesValue {
    let mut acc = NeumaierSum::new();
    let mut magnitude = 0.0f64;
    for kn in knots {
        let g = gap(u, kn.sum);
        if g <= 0.0 {
            break;
        }
        let term = kn.coeff * g.powi(power as i32);
        magnitude = magnitude.max(term.abs());
        acc += term;
    }
    SeriesValue {
        value: acc.value(),
        magnitude,
    }
}

fn table_double_pair(knots: &[Knot], u: f64, power: u32) -> (SeriesValue, SeriesValue) {
    let mut dacc = NeumaierSum::new();
    let mut cacc = NeumaierSum::new();
    let (mut dmag, mut cmag) = (0.0f64, 0.0f64);
    for kn in knots {
        let g = gap(u, kn.sum);
        if g <= 0.0 {
            break;
        }
        let t = kn.coeff * g.powi(power as i32);
        let tc = t * g;
        dmag = dmag.max(t.abs());
        cmag = cmag.max(tc.abs());
        dacc += t;
        cacc += tc;
    }
    (
        SeriesValue {
            value: dacc.value(),
            magnitude: dmag,
        },
        SeriesValue {
            value: cacc.value(),
            magnitude: cmag,
        },
    )
}

fn table_dd(knots: &[Knot], u: f64, power: u32) -> f64 {
    let u = DoubleDouble::from_f64(u);
    let mut acc = DoubleDouble::ZERO;
    for kn in knots {
        let g = u - kn.sum;
        if !g.is_sign_positive_nonzero() {
            break;
        }
        acc += g.powi(power).mul_f64(kn.coeff);
    }
    acc.to_f64()
}

/// Gray-code walk over all `2^m` subsets; `us` must be sorted ascending.
fn stream_dd(r: &[f64], us: &[f64], power: u32) -> Vec<f64> {
    let m = r.len();
    let mut acc = vec![DoubleDouble::ZERO; us.len()];
    let udd: Vec<DoubleDouble> = us.iter().map(|&u| DoubleDouble::from_f64(u)).collect();
    let mut sum = DoubleDouble::ZERO;
    let mut members = 0u64;
    let mut size = 0u32;
    let total = 1u64 << m;
    let visit = |sum: DoubleDouble, size: u32, acc: &mut [DoubleDouble]| {
        let sign = if size % 2 == 0 { 1.0 } else { -1.0 };
        let start = us.partition_point(|&u| u <= sum.hi + sum.lo);
        for (a, &u) in acc[start..].iter_mut().zip(&udd[start..]) {
            let g = u - sum;
            if g.is_sign_positive_nonzero() {
                *a += g.powi(power).mul_f64(sign);
            }
        }
    };
    visit(sum, size, &mut acc);
    for i in 1..total {
        let bit = i.trailing_zeros() as usize;
        let mask = 1u64 << bit;
        let w = DoubleDouble::from_f64(r[bit]);
        if members & mask == 0 {
            sum += w;
            size += 1;
        } else {
            sum = sum - w;
            size -= 1;
        }
        members ^= mask;
        visit(sum, size, &mut acc);
    }
    acc.into_iter().map(DoubleDouble::to_f64).collect()
}
