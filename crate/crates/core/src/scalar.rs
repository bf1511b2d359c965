//! Scalar abstraction shared by the numeric kernels.
//!
//! Scoring, aggregation, weight rescaling and the breaks classifier are
//! written once against [`Scalar`] and instantiated for `f64` in the
//! pipeline and for [`BigRational`] where exact equality matters
//! (tie-breaking, sum-to-one checks, convex-combination invariance).

use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar: Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync {
    /// Lossless for `f64` and for rationals (every finite double is a dyadic rational).
    fn from_real(v: f64) -> Self {
        Self::from_f64(v).expect("finite value")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits scalar")
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("int") / Self::from_i64(den).expect("int")
    }

    fn to_real(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    /// Clamp into `[0, 1]`.
    fn unit_clamp(self) -> Self {
        Self::max_of(Self::zero(), Self::min_of(self, Self::one()))
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {}

/// Total order on scalars that are known to be finite.
pub(crate) fn cmp_scalar<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

/// Sum in iteration order.
pub(crate) fn sum<'a, T: Scalar + 'a>(it: impl IntoIterator<Item = &'a T>) -> T {
    it.into_iter().fold(T::zero(), |acc, v| acc + v.clone())
}

/// The rational value of the shortest decimal that round-trips to `v`,
/// so a configured `0.2` becomes exactly 1/5.
pub fn decimal_rational(v: f64) -> BigRational {
    assert!(v.is_finite(), "finite value");
    // Display for f64 never uses an exponent
    let text = format!("{}", v.abs());
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: num_bigint::BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let scale = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
    let r = BigRational::new(digits, scale);
    if v < 0.0 {
        -r
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_reading() {
        assert_eq!(decimal_rational(0.2), BigRational::ratio(1, 5));
        assert_eq!(decimal_rational(-0.35), BigRational::ratio(-7, 20));
        assert_eq!(decimal_rational(3.0), BigRational::ratio(3, 1));
        assert_eq!(decimal_rational(1e-20), BigRational::ratio(1, 10).pow(20));
    }

    #[test]
    fn doubles_convert_exactly_to_rationals() {
        let r = BigRational::from_real(0.1);
        assert_eq!(r.to_real(), 0.1);
        assert_ne!(r, BigRational::ratio(1, 10));
        assert_eq!(BigRational::from_real(0.25), BigRational::ratio(1, 4));
    }

    #[test]
    fn clamp_and_order() {
        assert_eq!(1.7f64.unit_clamp(), 1.0);
        assert_eq!((-0.2f64).unit_clamp(), 0.0);
        assert_eq!(BigRational::ratio(3, 2).unit_clamp(), BigRational::ratio(1, 1));
        assert_eq!(f64::min_of(2.0, 1.0), 1.0);
    }
}
