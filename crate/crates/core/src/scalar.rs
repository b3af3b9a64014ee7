//! Probability scalars.
//!
//! The environment tables, loss specs, and both planner routes are generic
//! over [`Scalar`] so the same code runs in double precision (the default)
//! and in exact rational arithmetic (`BigRational`), which backs the
//! tightest oracle tests.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;

    /// Sums a sequence of terms. The `f64` impl uses compensated summation.
    fn sum<I: IntoIterator<Item = Self>>(iter: I) -> Self;

    fn abs_diff(&self, other: &Self) -> f64 {
        (self.to_f64() - other.to_f64()).abs()
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn sum<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        for v in iter {
            acc.add(v);
        }
        acc.total()
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    /// Exact conversion: the rational equals the binary fraction the float holds.
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }

    fn sum<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter().fold(BigRational::zero(), |a, b| a + b)
    }

    fn abs_diff(&self, other: &Self) -> f64 {
        Scalar::to_f64(&(self.clone() - other.clone()).abs())
    }
}

/// Kahan–Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Stable `ln(sum(exp(x)))` over a slice. Returns `-inf` for an empty slice
/// or when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let shifted: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + shifted.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::default();
        acc.add(1.0);
        for _ in 0..10 {
            acc.add(1e-16);
        }
        let naive = (0..10).fold(1.0f64, |a, _| a + 1e-16);
        assert_eq!(naive, 1.0);
        assert!(acc.total() > 1.0);
        assert!((acc.total() - (1.0 + 1e-15)).abs() < 2.3e-16);
    }

    #[test]
    fn log_sum_exp_matches_direct_small_values() {
        let vals = [0.5f64.ln(), 0.2f64.ln(), 0.3f64.ln()];
        assert!((log_sum_exp(&vals) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let vals = [-1200.0, -1202.0];
        let expected = -1200.0 + (1.0f64 + (-2.0f64).exp()).ln();
        assert!((log_sum_exp(&vals) - expected).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_all_neg_inf() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn rational_from_ratio_is_exact() {
        let r = BigRational::from_ratio(3, 4);
        assert_eq!(Scalar::to_f64(&r), 0.75);
        let s = BigRational::from_ratio(1, 3) + BigRational::from_ratio(2, 3);
        assert!(s.is_one());
    }
}
