//! Exact rational arithmetic used throughout the crate.
//!
//! `Rat` is an arbitrary-precision fraction, always kept in lowest terms with
//! a positive denominator. The canonical text form is `"num/den"` (e.g.
//! `"3/2"`, `"5/1"`); parsing additionally accepts a bare integer (`"5"`).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

/// Exact rational number (arbitrary-precision numerator and denominator).
pub type Rat = BigRational;

/// Builds a rational from an integer numerator and denominator.
///
/// Panics if `den == 0`; intended for literals in code and tests.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Builds a rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Zero.
pub fn zero() -> Rat {
    Rat::zero()
}

/// One.
pub fn one() -> Rat {
    Rat::one()
}

/// Formats a rational canonically as `"num/den"` (always including the
/// denominator, e.g. `"5/1"`), the form used in all JSON and CSV output.
pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"num/den"` or a bare integer string into a rational.
pub fn parse_rat(s: &str) -> Result<Rat, ParseRatError> {
    let s = s.trim();
    let (num_s, den_s) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num_s).map_err(|_| ParseRatError::Malformed(s.to_string()))?;
    let den = BigInt::from_str(den_s).map_err(|_| ParseRatError::Malformed(s.to_string()))?;
    if den.is_zero() {
        return Err(ParseRatError::ZeroDenominator(s.to_string()));
    }
    Ok(Rat::new(num, den))
}

/// Error from [`parse_rat`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRatError {
    #[error("malformed rational `{0}` (expected `num/den` or an integer)")]
    Malformed(String),
    #[error("rational `{0}` has a zero denominator")]
    ZeroDenominator(String),
}

/// Renders a rational as a decimal string with exactly `precision` digits
/// after the point, rounding half away from zero. `6/5` at precision 3 is
/// `"1.200"`.
pub fn decimal_string(r: &Rat, precision: usize) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let abs = r.abs();
    let scale = BigInt::from(10u32).pow(precision as u32);
    // round(|r| * 10^p) with ties away from zero
    let scaled = &abs * Rat::from_integer(scale.clone());
    let twice = scaled.numer() * BigInt::from(2) + scaled.denom();
    let rounded: BigInt = twice / (scaled.denom() * BigInt::from(2));
    let (int_part, frac_part) = (rounded.clone() / &scale, rounded % &scale);
    if precision == 0 {
        format!("{}{}", sign, int_part)
    } else {
        format!("{}{}.{:0>width$}", sign, int_part, frac_part.to_string(), width = precision)
    }
}

/// `H_k = 1 + 1/2 + … + 1/k`; `H_0 = 0`.
pub fn harmonic(k: usize) -> Rat {
    let mut h = Rat::zero();
    for i in 1..=k {
        h += rat(1, i as i64);
    }
    h
}

/// Converts to `f64` (lossy; only for human-facing sorting/printing, never
/// for comparisons that decide results).
pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter serializing a `Rat` as its `"num/den"` string and accepting
/// either that form, a bare integer string, or a JSON integer on input.
pub mod rat_serde {
    use super::*;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rat, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(n) => Ok(rat_int(n)),
            Raw::Str(s) => parse_rat(&s).map_err(DeError::custom),
        }
    }
}

/// Like [`rat_serde`] but for `Option<Rat>`.
pub mod rat_serde_opt {
    use super::*;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rat>, ser: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => ser.serialize_some(&format_rat(r)),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Rat>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        let raw: Option<Raw> = Option::deserialize(de)?;
        match raw {
            None => Ok(None),
            Some(Raw::Int(n)) => Ok(Some(rat_int(n))),
            Some(Raw::Str(s)) => parse_rat(&s).map(Some).map_err(DeError::custom),
        }
    }
}
