//! Exact rational probabilities.
//!
//! Every count-derived quantity in this crate is an arbitrary-precision
//! rational; the strict-vs-weak inequality distinctions that decide whether a
//! reversal exists are unsafe in floating point. Floats only enter through
//! explicit conversion helpers with a declared tolerance.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::fmt;

use crate::error::{Error, Result};

/// Exact rational number, re-exported so callers need not depend on `num`.
pub type Rational = BigRational;

/// Convenience constructor from machine integers.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Sign of an exact quantity. No tolerance is involved for integer-count inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Zero,
    Negative,
}

impl Sign {
    pub fn of(r: &Rational) -> Sign {
        if r.is_zero() {
            Sign::Zero
        } else if r.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Zero => Sign::Zero,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// An exact rational in [0, 1], kept in lowest terms (BigRational normalizes).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Probability(Rational);

impl Probability {
    pub fn new(value: Rational) -> Result<Probability> {
        if value.is_negative() || value > Rational::one() {
            return Err(Error::InvalidProbability(value.to_string()));
        }
        Ok(Probability(value))
    }

    /// Exact ratio of two nonnegative counts, `num / den`.
    pub fn from_counts(num: u64, den: u64) -> Result<Probability> {
        if den == 0 {
            return Err(Error::ZeroMargin(format!("{num}/{den}")));
        }
        Probability::new(ratio(num as i64, den as i64))
    }

    pub fn as_rational(&self) -> &Rational {
        &self.0
    }

    pub fn into_rational(self) -> Rational {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.0)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_rational(&self.0, serializer)
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    let num = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
    let den = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
    num / den
}

/// Serializes a rational as `{num, den, decimal}`; num/den are strings so
/// arbitrary precision survives JSON round-trips.
pub fn serialize_rational<S: Serializer>(
    r: &Rational,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut s = serializer.serialize_struct("Rational", 3)?;
    s.serialize_field("num", &r.numer().to_string())?;
    s.serialize_field("den", &r.denom().to_string())?;
    s.serialize_field("decimal", &rational_to_f64(r))?;
    s.end()
}

/// Wrapper so bare `Rational` fields can derive `Serialize`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rat(pub Rational);

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_rational(&self.0, serializer)
    }
}

/// Parses `"3/10"`, `"0.3"`, `"-1.25"` or `"7"` into an exact rational.
/// Decimal strings convert exactly (no float detour).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.starts_with('-');
        let int_digits = if int_part.is_empty() || int_part == "-" {
            "0".to_string()
        } else {
            int_part.trim_start_matches(['-', '+']).to_string()
        };
        if !frac_part.chars().all(|c| c.is_ascii_digit()) || frac_part.is_empty() {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        let int_val: BigInt = int_digits
            .parse()
            .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let frac_val: BigInt = frac_part
            .parse()
            .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let mut value =
            Rational::from(int_val) + Rational::new(frac_val, scale);
        if negative {
            value = -value;
        }
        return Ok(value);
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    Ok(Rational::from(n))
}

/// Converts a float to the simplest rational within `tol` of it
/// (Stern-Brocot walk). Used for pre-given float probabilities; count-derived
/// quantities never pass through here.
pub fn rational_from_f64(x: f64, tol: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite float {x}")));
    }
    let negative = x < 0.0;
    let x_abs = x.abs();
    let whole = x_abs.floor();
    let frac = x_abs - whole;
    // Stern-Brocot search for the simplest fraction within tol of frac.
    let (mut lo_n, mut lo_d, mut hi_n, mut hi_d) = (0u64, 1u64, 1u64, 1u64);
    let (n, d) = if frac <= tol {
        (0u64, 1u64)
    } else if frac >= 1.0 - tol {
        (1u64, 1u64)
    } else {
        loop {
            let mid_n = lo_n + hi_n;
            let mid_d = lo_d + hi_d;
            let mid = mid_n as f64 / mid_d as f64;
            if (mid - frac).abs() <= tol {
                break (mid_n, mid_d);
            } else if mid < frac {
                lo_n = mid_n;
                lo_d = mid_d;
            } else {
                hi_n = mid_n;
                hi_d = mid_d;
            }
            if mid_d > 1_000_000_000 {
                break (mid_n, mid_d);
            }
        }
    };
    let n = n + whole as u64 * d;
    let r = ratio(n as i64, d as i64);
    Ok(if negative { -r } else { r })
}
