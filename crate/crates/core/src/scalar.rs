//! Arithmetic backends for the algebraic layer.
//!
//! The algebra and symmetric-product code is generic over [`Scalar`], which is
//! implemented for `f64` (simulation) and [`Rational`] (exact checks of the
//! structure-constant tables).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact arbitrary-precision rational.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True for exact arithmetic, where comparisons use no tolerance.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }
    fn to_f64(&self) -> f64;

    /// Equality up to `tol` in float mode, exact otherwise.
    fn near(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.to_f64() - other.to_f64()).abs() <= tol
        }
    }

    fn is_positive(&self) -> bool;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
}

/// Parses `"3"`, `"-3/4"` or a decimal literal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    let (int, frac) = s.split_once('.')?;
    let neg = int.starts_with('-');
    let digits = format!("{}{}", int.trim_start_matches(['-', '+']), frac);
    let n: BigInt = digits.parse().ok()?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(n, d);
    Some(if neg { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/4"), Some(Rational::ratio(3, 4)));
        assert_eq!(parse_rational("-2"), Some(Rational::from_i64(-2)));
        assert_eq!(parse_rational("0.25"), Some(Rational::ratio(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(Rational::ratio(-3, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn near_is_exact_for_rationals() {
        let a = Rational::ratio(1, 3);
        let b = Rational::ratio(1, 3) + Rational::ratio(1, 1_000_000_000);
        assert!(!a.near(&b, 1.0));
        assert!(1.0f64.near(&(1.0 + 1e-13), 1e-12));
    }
}
