//! Exact rationals and mixed exact/floating results.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `1 / 2^k`.
pub fn inv_pow2(k: usize) -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(1) << k)
}

/// The exact value of a finite float.
pub fn from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_f64(x)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A result that is exact when the inputs allow it.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(BigRational),
    Approx(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => to_f64(r),
            Number::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Approx(_) => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn abs(&self) -> Number {
        match self {
            Number::Exact(r) => Number::Exact(r.abs()),
            Number::Approx(x) => Number::Approx(x.abs()),
        }
    }

    fn combine(
        &self,
        other: &Number,
        exact: impl Fn(&BigRational, &BigRational) -> BigRational,
        approx: impl Fn(f64, f64) -> f64,
    ) -> Number {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Number::Exact(exact(a, b)),
            _ => Number::Approx(approx(self.to_f64(), other.to_f64())),
        }
    }

    pub fn add(&self, other: &Number) -> Number {
        self.combine(other, |a, b| a + b, |a, b| a + b)
    }

    pub fn sub(&self, other: &Number) -> Number {
        self.combine(other, |a, b| a - b, |a, b| a - b)
    }

    pub fn mul(&self, other: &Number) -> Number {
        self.combine(other, |a, b| a * b, |a, b| a * b)
    }

    pub fn zero() -> Number {
        Number::Exact(BigRational::zero())
    }
}

impl From<BigRational> for Number {
    fn from(r: BigRational) -> Self {
        Number::Exact(r)
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Approx(x)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(r) => write!(f, "{r}"),
            Number::Approx(x) => write!(f, "{x}"),
        }
    }
}

/// JSON form `{"num": int, "den": int}`. Integers outside `i64` are written
/// as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JsonRational(pub BigRational);

#[derive(Serialize, Deserialize)]
struct RawRational {
    num: serde_json::Value,
    den: serde_json::Value,
}

fn int_to_json(i: &BigInt) -> serde_json::Value {
    match i.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(i.to_string()),
    }
}

fn int_from_json(v: &serde_json::Value) -> Option<BigInt> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().map(BigInt::from),
        serde_json::Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

impl Serialize for JsonRational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawRational {
            num: int_to_json(self.0.numer()),
            den: int_to_json(self.0.denom()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JsonRational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawRational::deserialize(d)?;
        let num = int_from_json(&raw.num).ok_or_else(|| D::Error::custom("bad numerator"))?;
        let den = int_from_json(&raw.den).ok_or_else(|| D::Error::custom("bad denominator"))?;
        if den.is_zero() {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(JsonRational(BigRational::new(num, den)))
    }
}

/// JSON form of a [`Number`]: a rational object when exact, a float otherwise.
impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Number::Exact(r) => JsonRational(r.clone()).serialize(s),
            Number::Approx(x) => s.serialize_f64(*x),
        }
    }
}
