//! Exact rational helpers shared by every module.
//!
//! Rationals are `malachite_q::Rational`, which is always kept in lowest
//! terms with a positive denominator. Serialization uses `"num/den"` strings.

use std::fmt;
use std::str::FromStr;

use malachite_base::num::arithmetic::traits::Abs;
use malachite_base::num::basic::traits::{One, Zero};
use malachite_base::num::conversion::traits::RoundingFrom;
use malachite_base::rounding_modes::RoundingMode;
use malachite_q::rational::arithmetic::traits::SimplestRationalInInterval;
pub use malachite_q::Rational;
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub fn zero() -> Rational {
    Rational::ZERO
}

pub fn one() -> Rational {
    Rational::ONE
}

pub fn int(n: i64) -> Rational {
    Rational::from(n)
}

/// `n/d`; panics on a zero denominator.
pub fn ratio(n: i64, d: i64) -> Rational {
    assert!(d != 0, "zero denominator");
    Rational::from_signeds(n, d)
}

pub fn is_zero(q: &Rational) -> bool {
    *q == Rational::ZERO
}

pub fn abs(q: &Rational) -> Rational {
    q.clone().abs()
}

/// Canonical `"num/den"` form. Integers keep an explicit `/1` so that every
/// serialized rational has the same shape.
pub fn to_string(q: &Rational) -> String {
    let (n, d) = q.to_numerator_and_denominator();
    let sign = if *q < 0u32 { "-" } else { "" };
    format!("{sign}{n}/{d}")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"n/d"`, `"n"` or a plain decimal such as `"0.25"`.
pub fn parse(s: &str) -> Result<Rational, ParseRationalError> {
    let t = s.trim();
    if let Ok(q) = Rational::from_str(t) {
        return Ok(q);
    }
    parse_decimal(t).ok_or_else(|| ParseRationalError(s.to_string()))
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (whole, frac) = body.split_once('.')?;
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let digits = digits.trim_start_matches('0');
    let num = if digits.is_empty() {
        Rational::ZERO
    } else {
        Rational::from_str(digits).ok()?
    };
    let mut den = Rational::ONE;
    for _ in 0..frac.len() {
        den *= Rational::from(10u32);
    }
    let q = num / den;
    Some(if neg { -q } else { q })
}

pub fn to_f64(q: &Rational) -> f64 {
    f64::rounding_from(q, RoundingMode::Nearest).0
}

/// Exact binary value of a finite float.
pub fn from_f64_exact(x: f64) -> Option<Rational> {
    Rational::try_from(x).ok()
}

/// Nearest `n/denominator` to `x` (ties away from zero).
pub fn round_to_denominator(x: f64, denominator: u64) -> Rational {
    let scaled = (x * denominator as f64).round();
    Rational::from_signeds(scaled as i64, denominator as i64)
}

/// The rational with the smallest denominator in `[lo, hi]`.
pub fn simplest_in_closed(lo: &Rational, hi: &Rational) -> Rational {
    Rational::simplest_rational_in_closed_interval(lo, hi)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// FNV-1a over the comma-joined canonical serialization of `values`.
pub fn hash_rationals(values: &[Rational]) -> u64 {
    let joined = values.iter().map(to_string).collect::<Vec<_>>().join(",");
    fnv1a64(joined.as_bytes())
}

/// Display adapter printing the canonical `"num/den"` form.
pub struct Fraction<'a>(pub &'a Rational);

impl fmt::Display for Fraction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_string(self.0))
    }
}

/// Short human form: `"2/3"`, `"1"`, `"-1/2"`.
pub fn pretty(q: &Rational) -> String {
    q.to_string()
}

/// `serde(with = "crate::rational::serde_rational")` for single values.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }
}

/// `serde(with = "crate::rational::serde_rational_vec")` for vectors.
pub mod serde_rational_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for q in v {
            seq.serialize_element(&to_string(q))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        struct SeqVisitor;
        impl<'de> Visitor<'de> for SeqVisitor {
            type Value = Vec<Rational>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a sequence of rationals")
            }
            fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(q) = seq.next_element::<Wrapped>()? {
                    out.push(q.0);
                }
                Ok(out)
            }
        }
        d.deserialize_seq(SeqVisitor)
    }
}

/// `serde(with = "crate::rational::serde_rational_opt")`.
pub mod serde_rational_opt {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match q {
            Some(q) => s.serialize_some(&to_string(q)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let v: Option<Wrapped> = serde::Deserialize::deserialize(d)?;
        Ok(v.map(|w| w.0))
    }
}

struct Wrapped(Rational);

impl<'de> serde::Deserialize<'de> for Wrapped {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(RationalVisitor).map(Wrapped)
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational as \"num/den\" or an integer")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        parse(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::from(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_strings() {
        assert_eq!(to_string(&ratio(2, 4)), "1/2");
        assert_eq!(to_string(&ratio(-6, 3)), "-2/1");
        assert_eq!(to_string(&zero()), "0/1");
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse("-7").unwrap(), int(-7));
        assert_eq!(parse("0.01").unwrap(), ratio(1, 100));
        assert_eq!(parse("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse(".5").unwrap(), ratio(1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
    }

    #[test]
    fn simplest_fraction_recovers_two_thirds() {
        let lo = ratio(666_665, 1_000_000);
        let hi = ratio(666_668, 1_000_000);
        assert_eq!(simplest_in_closed(&lo, &hi), ratio(2, 3));
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn rounding_to_denominator() {
        assert_eq!(round_to_denominator(0.3333333333333, 1000), ratio(333, 1000));
        assert_eq!(round_to_denominator(0.5, 4), ratio(1, 2));
    }
}
