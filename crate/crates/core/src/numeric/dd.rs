use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` of two doubles with `|lo| <= ulp(hi)/2`,
/// giving roughly 106 bits of significand.
///
/// Only the handful of operations the alternating subset-sum series needs
/// are provided.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    /// Exact sum of two doubles.
    #[inline]
    pub fn sum_exact(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Self { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    /// `self^exp` by binary exponentiation.
    pub fn powi(self, mut exp: u32) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            exp >>= 1;
            if exp > 0 {
                base = base * base;
            }
        }
        acc
    }

    #[inline]
    pub fn is_sign_positive_nonzero(self) -> bool {
        self.hi > 0.0 || (self.hi == 0.0 && self.lo > 0.0)
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self::from_f64(v)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_bits_below_double_precision() {
        let a = DoubleDouble::sum_exact(1.0, 1e-20);
        let b = a - DoubleDouble::ONE;
        assert_eq!(b.to_f64(), 1e-20);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = DoubleDouble::sum_exact(0.3, 1e-18);
        let mut expected = DoubleDouble::ONE;
        for _ in 0..13 {
            expected = expected * x;
        }
        let got = x.powi(13);
        assert!((got - expected).to_f64().abs() < 1e-30);
        assert_eq!(x.powi(0), DoubleDouble::ONE);
    }

    #[test]
    fn product_error_is_captured() {
        // (1 + 2^-30)^2 = 1 + 2^-29 + 2^-60; the last bit is below f64 precision.
        let x = DoubleDouble::from_f64(1.0 + 2f64.powi(-30));
        let sq = x * x;
        let rest = sq - DoubleDouble::from_f64(1.0 + 2f64.powi(-29));
        assert_eq!(rest.to_f64(), 2f64.powi(-60));
    }
}
