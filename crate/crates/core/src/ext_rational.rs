//! Rationals extended by one formal positive infinitesimal `ε`.
//!
//! A value `q0 + q1·ε` stands for an exponent that is "`q0`, nudged by an
//! arbitrarily small amount". Comparisons are lexicographic, so `1 - ε < 1`
//! and `3 + ε > 3` hold exactly while every case split stays decidable.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

pub type Rational = Rational64;

/// Parses "3/2", "-1", "0.25" style strings into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Ok(n) = s.parse::<i64>() {
        return Some(Rational::from_integer(n));
    }
    // finite decimal literal
    let neg = s.starts_with('-');
    let body = s.trim_start_matches(['-', '+']);
    let (int, frac) = body.split_once('.')?;
    if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let den = 10i64.checked_pow(frac.len() as u32)?;
    let frac_v: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let v = Rational::new(int.checked_mul(den)?.checked_add(frac_v)?, den);
    Some(if neg { -v } else { v })
}

pub fn rational_to_string(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ExtRational {
    pub standard: Rational,
    pub eps: Rational,
}

impl ExtRational {
    pub const fn new(standard: Rational, eps: Rational) -> Self {
        ExtRational { standard, eps }
    }

    pub fn from_rational(q: Rational) -> Self {
        ExtRational { standard: q, eps: Rational::zero() }
    }

    pub fn int(n: i64) -> Self {
        Self::from_rational(Rational::from_integer(n))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Self::from_rational(Rational::new(n, d))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    /// The bare infinitesimal `ε`.
    pub fn epsilon() -> Self {
        ExtRational { standard: Rational::zero(), eps: Rational::one() }
    }

    /// `1 − ε`, the "1−" exponent.
    pub fn one_minus() -> Self {
        ExtRational { standard: Rational::one(), eps: -Rational::one() }
    }

    pub fn is_standard(&self) -> bool {
        self.eps.is_zero()
    }

    /// Instantiate `ε` with a concrete small positive number.
    pub fn to_f64(&self, eps_value: f64) -> f64 {
        self.standard.to_f64().unwrap_or(f64::NAN) + self.eps.to_f64().unwrap_or(f64::NAN) * eps_value
    }

    pub fn standard_f64(&self) -> f64 {
        self.standard.to_f64().unwrap_or(f64::NAN)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    pub fn scale(self, k: Rational) -> Self {
        ExtRational { standard: self.standard * k, eps: self.eps * k }
    }
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.standard.cmp(&other.standard).then(self.eps.cmp(&other.eps))
    }
}

impl Add for ExtRational {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ExtRational { standard: self.standard + o.standard, eps: self.eps + o.eps }
    }
}

impl Sub for ExtRational {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        ExtRational { standard: self.standard - o.standard, eps: self.eps - o.eps }
    }
}

impl Neg for ExtRational {
    type Output = Self;
    fn neg(self) -> Self {
        ExtRational { standard: -self.standard, eps: -self.eps }
    }
}

impl Mul<i64> for ExtRational {
    type Output = Self;
    fn mul(self, k: i64) -> Self {
        self.scale(Rational::from_integer(k))
    }
}

impl From<Rational> for ExtRational {
    fn from(q: Rational) -> Self {
        Self::from_rational(q)
    }
}

impl From<i64> for ExtRational {
    fn from(n: i64) -> Self {
        Self::int(n)
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = rational_to_string(&self.standard);
        if self.eps.is_zero() {
            return write!(f, "{s}");
        }
        let sign = if self.eps.is_negative() { '-' } else { '+' };
        let mag = self.eps.abs();
        if mag.is_one() {
            write!(f, "{s}{sign}ε")
        } else {
            write!(f, "{s}{sign}{}ε", rational_to_string(&mag))
        }
    }
}

impl fmt::Debug for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// Serialized as a two element array of rational strings: ["3/2", "-1"].
impl Serialize for ExtRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&rational_to_string(&self.standard))?;
        t.serialize_element(&rational_to_string(&self.eps))?;
        t.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RationalRepr {
    Int(i64),
    Float(f64),
    Str(String),
}

impl RationalRepr {
    fn into_rational<E: de::Error>(self) -> Result<Rational, E> {
        match self {
            RationalRepr::Int(n) => Ok(Rational::from_integer(n)),
            RationalRepr::Str(s) => {
                parse_rational(&s).ok_or_else(|| E::custom(format!("bad rational {s:?}")))
            }
            RationalRepr::Float(x) => parse_rational(&format!("{x}"))
                .ok_or_else(|| E::custom(format!("non-exact rational {x}"))),
        }
    }
}

/// Accepts `"3/2"`, `3`, or `0.25` for a plain rational field.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&rational_to_string(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        RationalRepr::deserialize(d)?.into_rational()
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match q {
                Some(q) => s.serialize_some(&rational_to_string(q)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Option::<RationalRepr>::deserialize(d)?
                .map(RationalRepr::into_rational)
                .transpose()
        }
    }
}

impl<'de> Deserialize<'de> for ExtRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ExtRational;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("[q0, q1] pair of rationals")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<ExtRational, A::Error> {
                let q0: RationalRepr =
                    seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let q1: RationalRepr =
                    seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                Ok(ExtRational::new(q0.into_rational()?, q1.into_rational()?))
            }
        }
        deserializer.deserialize_seq(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        assert!(ExtRational::one_minus() < ExtRational::int(1));
        assert!(ExtRational::int(3) + ExtRational::epsilon() > ExtRational::int(3));
        assert!(ExtRational::frac(1, 2) + ExtRational::epsilon() * 100 < ExtRational::frac(3, 4));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/2"), Some(rat(3, 2)));
        assert_eq!(parse_rational("-1"), Some(rat(-1, 1)));
        assert_eq!(parse_rational("0.25"), Some(rat(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(rat(-3, 2)));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let x: ExtRational = serde_json::from_str(r#"["3/2","-1"]"#).unwrap();
        assert_eq!(x, ExtRational::frac(3, 2) - ExtRational::epsilon());
        let y: ExtRational = serde_json::from_str("[1,0]").unwrap();
        assert_eq!(y, ExtRational::int(1));
        assert_eq!(serde_json::to_string(&x).unwrap(), r#"["3/2","-1"]"#);
    }

    #[test]
    fn display() {
        assert_eq!(ExtRational::one_minus().to_string(), "1-ε");
        assert_eq!((ExtRational::frac(1, 2) + ExtRational::epsilon() * 2).to_string(), "1/2+2ε");
    }
}
