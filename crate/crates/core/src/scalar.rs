//! Scalar types shared across the crate.
//!
//! Symbolic work is carried out over exact rationals; numeric work
//! (evaluation, sampling, integration) is generic over [`Scalar`].

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Exact arbitrary-precision rational.
pub type Rational = BigRational;

/// Floating point scalar used by the numeric layers: f32 or f64.
pub trait Scalar: num_traits::Float + FromPrimitive + Debug + Send + Sync + 'static {
    fn from_rational(q: &Rational) -> Self {
        Self::from_f64(q.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(Self::nan)
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn is_integer(q: &Rational) -> bool {
    q.denom().is_one()
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Formats as `p` or `p/q`.
pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p`, `p/q`, or a terminating decimal such as `-0.25`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let whole: BigInt = if ip.is_empty() { BigInt::zero() } else { ip.parse().ok()? };
        let frac: BigInt = if fp.is_empty() { BigInt::zero() } else { fp.parse().ok()? };
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let v = Rational::new(whole * &scale + frac, scale);
        return Some(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Rational::from_integer(n))
}

/// Exact `q^(p)` for rational `p` when the result is rational.
pub fn rational_pow(base: &Rational, exp: &Rational) -> Option<Rational> {
    if is_integer(exp) {
        let e = exp.to_i32()?;
        if base.is_zero() && e < 0 {
            return None;
        }
        return Some(num_traits::pow::Pow::pow(base, e));
    }
    if base.is_zero() {
        return if exp.is_positive() { Some(Rational::zero()) } else { None };
    }
    if base.is_negative() {
        return None;
    }
    let root = exp.denom().to_u32()?;
    let n = exact_root(base.numer(), root)?;
    let d = exact_root(base.denom(), root)?;
    let r = Rational::new(n, d);
    let e = exp.numer().to_i32()?;
    Some(num_traits::pow::Pow::pow(&r, e))
}

fn exact_root(v: &BigInt, k: u32) -> Option<BigInt> {
    let r = num_integer::Roots::nth_root(v, k);
    if num_traits::pow(r.clone(), k as usize) == *v {
        Some(r)
    } else {
        None
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| D::Error::custom(format!("not a rational: {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_and_decimals() {
        assert_eq!(parse_rational("-1/5"), Some(rat(-1, 5)));
        assert_eq!(parse_rational("0.25"), Some(rat(1, 4)));
        assert_eq!(parse_rational("-2.5"), Some(rat(-5, 2)));
        assert_eq!(parse_rational("7"), Some(int(7)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(format_rational(&rat(6, -4)), "-3/2");
    }

    #[test]
    fn exact_powers() {
        assert_eq!(rational_pow(&rat(4, 9), &rat(1, 2)), Some(rat(2, 3)));
        assert_eq!(rational_pow(&rat(8, 1), &rat(-2, 3)), Some(rat(1, 4)));
        assert_eq!(rational_pow(&int(2), &rat(1, 2)), None);
        assert_eq!(rational_pow(&int(-8), &rat(1, 3)), None);
        assert_eq!(rational_pow(&int(0), &int(-1)), None);
    }
}
