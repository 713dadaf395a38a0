//! Scalar abstraction: the numeric kernels are written once and instantiated
//! with `f64` (the working type), `f32`, or [`Rational`] for exact arithmetic.
//!
//! Probabilities carry no NaN/∞ after validation, so `PartialOrd` comparisons
//! are total on the values that actually flow through the library.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Exact arbitrary-precision rational, used by the cross-check oracle.
pub type Rational = BigRational;

/// Field scalar with an ordering and an absolute comparison tolerance.
///
/// The tolerance doubles as the validation slack (row sums, normalization)
/// and the tie/row-equality threshold. Exact types report zero tolerance and
/// therefore demand exact identities.
pub trait Scalar:
    Clone + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Debug + Display + 'static
{
    /// Absolute tolerance for validation and equality tests; zero for exact types.
    fn tolerance() -> Self;

    /// The exact value `num / den`.
    fn from_ratio(num: u64, den: u64) -> Self;

    /// Lossy view for reporting and diagnostics.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `|a - b| <= tolerance`.
    fn close_to(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> f64 {
        1e-12
    }

    fn from_ratio(num: u64, den: u64) -> f64 {
        num as f64 / den as f64
    }
}

impl Scalar for f32 {
    fn tolerance() -> f32 {
        1e-5
    }

    fn from_ratio(num: u64, den: u64) -> f32 {
        num as f32 / den as f32
    }
}

impl Scalar for Rational {
    fn tolerance() -> Rational {
        Rational::zero()
    }

    fn from_ratio(num: u64, den: u64) -> Rational {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }
}

/// Parses `"0.35"`, `"3/10"` or `"2"` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    if let Some((int_part, frac_part)) = text.split_once('.') {
        if !frac_part.chars().all(|c| c.is_ascii_digit()) || frac_part.is_empty() {
            return None;
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_part: BigInt = if int_part.is_empty() || int_part == "-" {
            BigInt::zero()
        } else {
            int_part.parse().ok()?
        };
        let digits: BigInt = frac_part.parse().ok()?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let frac = Rational::new(digits, scale);
        let whole = Rational::from(int_part);
        return Some(if negative { whole - frac } else { whole + frac });
    }
    let int: BigInt = text.parse().ok()?;
    Some(Rational::from(int))
}

pub(crate) fn max_scalar<T: Scalar>(a: T, b: T) -> T {
    if a > b {
        a
    } else {
        b
    }
}

pub(crate) fn min_scalar<T: Scalar>(a: T, b: T) -> T {
    if a < b {
        a
    } else {
        b
    }
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax<'a, T: PartialOrd + 'a>(values: impl IntoIterator<Item = &'a T>) -> usize {
    let mut best = 0usize;
    let mut best_val: Option<&T> = None;
    for (idx, v) in values.into_iter().enumerate() {
        match best_val {
            Some(b) if v <= b => {}
            _ => {
                best = idx;
                best_val = Some(v);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/10"), Some(Rational::from_ratio(3, 10)));
        assert_eq!(parse_rational("0.3"), Some(Rational::from_ratio(3, 10)));
        assert_eq!(parse_rational("0.35"), Some(Rational::from_ratio(7, 20)));
        assert_eq!(parse_rational("1"), Some(Rational::from_ratio(1, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("0.3e1"), None);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax([0.4, 0.4, 0.2].iter()), 0);
        assert_eq!(argmax([0.1, 0.4, 0.4].iter()), 1);
    }
}
