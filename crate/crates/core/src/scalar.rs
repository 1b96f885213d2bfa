//! Numeric abstraction shared by every algorithm in the crate.
//!
//! Floating types carry the solver tolerances; exact rationals use zero
//! tolerances so comparisons become strict.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// True for exact arithmetic (all tolerances are zero).
    const EXACT: bool;

    /// Primal feasibility tolerance.
    fn feas_tol() -> Self;
    /// Reduced-cost optimality tolerance.
    fn opt_tol() -> Self;
    /// Smallest magnitude accepted as a pivot element.
    fn pivot_tol() -> Self;
    /// Tolerance for tie detection between greedy step sizes.
    fn tie_tol() -> Self;

    /// Parses an integer, a decimal (`-12.375`) or a fraction (`7/3`).
    fn parse_decimal(s: &str) -> Option<Self>;
    /// Canonical text form that [`Scalar::parse_decimal`] reads back exactly.
    fn to_decimal(&self) -> String;

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer conversion")
    }

    fn approx(v: f64) -> Self {
        Self::from_f64(v).expect("finite value")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

pub fn min_of<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

pub fn max_of<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

macro_rules! float_scalar {
    ($t:ty, $feas:expr, $opt:expr, $piv:expr, $tie:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;
            fn feas_tol() -> Self {
                $feas
            }
            fn opt_tol() -> Self {
                $opt
            }
            fn pivot_tol() -> Self {
                $piv
            }
            fn tie_tol() -> Self {
                $tie
            }
            fn parse_decimal(s: &str) -> Option<Self> {
                let s = s.trim();
                if let Some((p, q)) = s.split_once('/') {
                    let p: $t = p.trim().parse().ok()?;
                    let q: $t = q.trim().parse().ok()?;
                    if q == 0.0 {
                        return None;
                    }
                    return Some(p / q);
                }
                let v: $t = s.parse().ok()?;
                v.is_finite().then_some(v)
            }
            fn to_decimal(&self) -> String {
                // Display for floats is the shortest string that round-trips.
                format!("{}", self)
            }
        }
    };
}

float_scalar!(f64, 1e-7, 1e-9, 1e-11, 1e-12);
float_scalar!(f32, 1e-4, 1e-5, 1e-6, 1e-6);

impl Scalar for BigRational {
    const EXACT: bool = true;
    fn feas_tol() -> Self {
        Self::zero()
    }
    fn opt_tol() -> Self {
        Self::zero()
    }
    fn pivot_tol() -> Self {
        Self::zero()
    }
    fn tie_tol() -> Self {
        Self::zero()
    }

    fn parse_decimal(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            return Some(BigRational::new(p, q));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{}{}", int_part, frac_part);
        let numer: BigInt = digits.parse().ok()?;
        let denom = num_traits::pow(BigInt::from(10), frac_part.len());
        let v = BigRational::new(numer, denom);
        Some(if neg { -v } else { v })
    }

    fn to_decimal(&self) -> String {
        let mut d = self.denom().clone();
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        let mut k2 = 0usize;
        let mut k5 = 0usize;
        while (&d % &two).is_zero() {
            d /= &two;
            k2 += 1;
        }
        while (&d % &five).is_zero() {
            d /= &five;
            k5 += 1;
        }
        if !d.is_one() {
            return format!("{}/{}", self.numer(), self.denom());
        }
        let places = k2.max(k5);
        if places == 0 {
            return self.numer().to_string();
        }
        let scaled = self * BigRational::from_integer(num_traits::pow(BigInt::from(10), places));
        let n = scaled.to_integer();
        let neg = n.is_negative();
        let mut digits = n.abs().to_string();
        if digits.len() <= places {
            digits = format!("{}{}", "0".repeat(places + 1 - digits.len()), digits);
        }
        let (ip, fp) = digits.split_at(digits.len() - places);
        format!("{}{}.{}", if neg { "-" } else { "" }, ip, fp)
    }

    fn approx(v: f64) -> Self {
        BigRational::from_float(v).expect("finite value")
    }
}

/// Converts between scalar types through their canonical decimal text.
///
/// `f64 -> BigRational` yields the shortest decimal the float prints as, which
/// is the value a user wrote (e.g. `0.62` becomes `31/50`).
pub fn convert<A: Scalar, B: Scalar>(v: &A) -> B {
    B::parse_decimal(&v.to_decimal()).expect("canonical decimal parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_decimal_round_trip() {
        for s in ["0", "97", "-3", "0.05", "87.5", "-0.125", "1/3", "-22/7"] {
            let v = BigRational::parse_decimal(s).unwrap();
            let back = v.to_decimal();
            assert_eq!(BigRational::parse_decimal(&back).unwrap(), v, "{s} -> {back}");
        }
        assert_eq!(BigRational::parse_decimal("0.62").unwrap().to_decimal(), "0.62");
        assert_eq!(BigRational::parse_decimal("2/6").unwrap().to_decimal(), "1/3");
        assert_eq!(BigRational::parse_decimal("-0.05").unwrap().to_decimal(), "-0.05");
    }

    #[test]
    fn float_decimal_round_trip() {
        for v in [0.1f64, 1.0 / 3.0, 87.5, 1e-300, 123456.789] {
            assert_eq!(f64::parse_decimal(&v.to_decimal()).unwrap(), v);
        }
        assert_eq!(f64::parse_decimal("1/4"), Some(0.25));
        assert_eq!(f64::parse_decimal("nan"), None);
    }

    #[test]
    fn convert_keeps_written_decimals() {
        let r: BigRational = convert(&0.62f64);
        assert_eq!(r, BigRational::new(31.into(), 50.into()));
    }
}
