//! Exact rational helpers built on `num-rational`.
//!
//! Rationals cross the JSON boundary as strings (`"3/4"`, `"-2"`, `"0.125"`);
//! integer and float JSON numbers are also accepted on input. Floats are read
//! through their shortest decimal rendering, so `0.1` parses as `1/10`.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact binary value of a finite float.
pub fn from_f64_exact(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::invalid(format!("{x} is not a finite number")))
}

/// The decimal the float prints as, e.g. `0.1` becomes `1/10`.
pub fn from_f64_decimal(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("{x} is not a finite number")));
    }
    parse(&format!("{x}"))
}

/// Parses `p/q`, an integer, or a decimal (optionally with an exponent).
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("cannot parse `{s}` as a rational"));
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::invalid(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole
        .chars()
        .chain(frac.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let joined = format!("{whole}{frac}");
    let mut value = Rational::from_integer(BigInt::from_str(&joined).map_err(|_| bad())?);
    let shift = exponent - frac.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    if shift >= 0 {
        value *= num_traits::pow(ten, shift as usize);
    } else {
        value /= num_traits::pow(ten, (-shift) as usize);
    }
    Ok(if negative { -value } else { value })
}

pub fn floor_i64(r: &Rational) -> Result<i64> {
    r.floor()
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::Overflow(format!("{r} does not fit in 64 bits")))
}

pub fn ceil_i64(r: &Rational) -> Result<i64> {
    r.ceil()
        .to_integer()
        .to_i64()
        .ok_or_else(|| Error::Overflow(format!("{r} does not fit in 64 bits")))
}

/// `value mod modulus`, normalized into `[0, modulus)`.
pub fn rem_euclid(value: &Rational, modulus: &Rational) -> Rational {
    debug_assert!(modulus.is_positive());
    let quotient = (value / modulus).floor();
    value - modulus * quotient
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    use num_integer::Integer;
    values
        .into_iter()
        .fold(BigInt::from(1), |acc, r| acc.lcm(r.denom()))
}

/// Renders a float with 17 significant digits.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

pub mod serde_str {
    //! `#[serde(with = "...")]` adapters for [`Rational`](super::Rational).
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    use super::Rational;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    pub(crate) struct RationalVisitor;

    impl Visitor<'_> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a rational as \"p/q\", a decimal string, or a number")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(super::int(v))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v.into()))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            super::from_f64_decimal(v).map_err(E::custom)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            super::parse(v).map_err(E::custom)
        }
    }

    pub mod option {
        use super::*;
        use serde::Deserialize;

        pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match value {
                Some(r) => s.collect_str(r),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] Rational);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;
        use serde::Deserialize;

        pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(values.len()))?;
            for v in values {
                seq.serialize_element(&v.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] Rational);
            Ok(Vec::<Wrap>::deserialize(d)?
                .into_iter()
                .map(|w| w.0)
                .collect())
        }
    }
}

/// Big integers travel through JSON as numbers when they fit in 64 bits and
/// as decimal strings otherwise.
pub(crate) fn bigint_to_json(v: &BigInt) -> serde_json::Value {
    match v.to_i64() {
        Some(small) => serde_json::Value::from(small),
        None => serde_json::Value::String(v.to_string()),
    }
}

pub(crate) fn bigint_from_json(v: &serde_json::Value) -> Result<BigInt> {
    match v {
        serde_json::Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .or_else(|| n.as_u64().map(BigInt::from))
            .ok_or_else(|| Error::invalid(format!("expected an integer, got {n}"))),
        serde_json::Value::String(s) => BigInt::from_str(s.trim())
            .map_err(|_| Error::invalid(format!("expected an integer, got `{s}`"))),
        other => Err(Error::invalid(format!("expected an integer, got {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse("3/4").unwrap(), ratio(3, 4));
        assert_eq!(parse("-6/8").unwrap(), ratio(-3, 4));
        assert_eq!(parse("0.125").unwrap(), ratio(1, 8));
        assert_eq!(parse("-2").unwrap(), int(-2));
        assert_eq!(parse("1.5e2").unwrap(), int(150));
        assert_eq!(parse("25e-2").unwrap(), ratio(1, 4));
        assert_eq!(parse(".5").unwrap(), ratio(1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn decimal_float_conversion() {
        assert_eq!(from_f64_decimal(0.1).unwrap(), ratio(1, 10));
        assert_ne!(from_f64_exact(0.1).unwrap(), ratio(1, 10));
        assert!(from_f64_decimal(f64::NAN).is_err());
    }

    #[test]
    fn euclidean_remainder() {
        assert_eq!(rem_euclid(&int(-1), &int(3)), int(2));
        assert_eq!(rem_euclid(&ratio(7, 2), &int(2)), ratio(3, 2));
        assert_eq!(rem_euclid(&int(4), &int(2)), int(0));
    }

    #[test]
    fn floors_and_ceils() {
        assert_eq!(floor_i64(&ratio(-1, 2)).unwrap(), -1);
        assert_eq!(ceil_i64(&ratio(-1, 2)).unwrap(), 0);
        assert_eq!(ceil_i64(&ratio(5, 2)).unwrap(), 3);
    }

    #[test]
    fn sig17_has_seventeen_digits() {
        assert_eq!(sig17(0.25), "2.5000000000000000e-1");
    }
}
