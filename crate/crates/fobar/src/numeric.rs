//! Exact decimal arithmetic helpers.
//!
//! Answers parsed out of model text are kept as arbitrary-precision
//! rationals so equality checks and vote aggregation never lose digits to
//! binary floating point. Every value produced by the parsers here has a
//! power-of-ten denominator and round-trips through its decimal string.

use std::str::FromStr;
use std::sync::LazyLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Relative tolerance for numeric answer equality.
pub const REL_TOLERANCE: f64 = 1e-6;
/// Absolute tolerance applied near zero.
pub const ABS_TOLERANCE: f64 = 1e-9;

static REL_TOL: LazyLock<BigRational> = LazyLock::new(|| ratio(1, 1_000_000));
static ABS_TOL: LazyLock<BigRational> = LazyLock::new(|| ratio(1, 1_000_000_000));

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parse a plain decimal literal: optional sign, digits, optional fraction.
/// Returns `None` for anything else (no exponents, no grouping).
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if body.is_empty() {
        return None;
    }
    let mut int_digits = String::new();
    let mut frac_digits = String::new();
    let mut seen_dot = false;
    for c in body.chars() {
        match c {
            '0'..='9' => {
                if seen_dot {
                    frac_digits.push(c);
                } else {
                    int_digits.push(c);
                }
            }
            '.' if !seen_dot => seen_dot = true,
            _ => return None,
        }
    }
    if int_digits.is_empty() && frac_digits.is_empty() {
        return None;
    }
    let digits = format!(
        "{}{}",
        if int_digits.is_empty() {
            "0"
        } else {
            &int_digits
        },
        frac_digits
    );
    let mut numer = BigInt::from_str(&digits).ok()?;
    if negative {
        numer = -numer;
    }
    let denom = BigInt::from(10u32).pow(frac_digits.len() as u32);
    Some(BigRational::new(numer, denom))
}

/// Parse a number as it appears in prose: tolerates comma grouping, a
/// leading currency sign, a trailing percent sign, and trailing sentence
/// punctuation. The bare magnitude is returned ("$12.50" parses as 12.5,
/// "5%" as 5).
pub fn parse_surface(s: &str) -> Option<BigRational> {
    let mut t = s.trim();
    while let Some(stripped) = t.strip_suffix(['.', ',', ';', ':', '!', '?']) {
        // "12.5" keeps its point because the fraction digits anchor it;
        // only a point with nothing after it is sentence punctuation.
        t = stripped.trim_end();
    }
    let (negative, rest) = match t.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, t),
    };
    let rest = rest.strip_prefix('$').unwrap_or(rest);
    let rest = rest.strip_suffix('%').unwrap_or(rest);
    let cleaned: String = rest.chars().filter(|c| *c != ',').collect();
    let value = parse_decimal(&cleaned)?;
    Some(if negative { -value } else { value })
}

/// Render a rational as its exact decimal string when the denominator is of
/// the form 2^a·5^b, falling back to "numer/denom" otherwise.
pub fn to_decimal_string(value: &BigRational) -> String {
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    let mut den = value.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", value.numer(), value.denom());
    }
    let scale = twos.max(fives);
    let scaled = value * BigRational::from_integer(BigInt::from(10u32).pow(scale));
    debug_assert!(scaled.is_integer());
    let mut digits = scaled.to_integer().abs().to_string();
    let sign = if value.is_negative() { "-" } else { "" };
    if scale == 0 {
        return format!("{sign}{digits}");
    }
    while digits.len() <= scale as usize {
        digits.insert(0, '0');
    }
    let split = digits.len() - scale as usize;
    let (int_part, frac_part) = digits.split_at(split);
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Parse the output of [`to_decimal_string`]: either a decimal literal or a
/// "numer/denom" pair.
pub fn parse_rational_string(s: &str) -> Option<BigRational> {
    if let Some((n, d)) = s.split_once('/') {
        let numer = BigInt::from_str(n.trim()).ok()?;
        let denom = BigInt::from_str(d.trim()).ok()?;
        if denom.is_zero() {
            return None;
        }
        Some(BigRational::new(numer, denom))
    } else {
        parse_decimal(s)
    }
}

/// Numeric equality under the answer tolerance: |a-b| within 1e-6 relative,
/// or 1e-9 absolute near zero. Evaluated exactly in rational arithmetic.
pub fn approx_eq(a: &BigRational, b: &BigRational) -> bool {
    let diff = (a - b).abs();
    let magnitude = a.abs().max(b.abs());
    let rel_bound = &*REL_TOL * &magnitude;
    let bound = rel_bound.max(ABS_TOL.clone());
    diff <= bound
}

/// Lossy conversion for reporting; aggregation that feeds probabilities
/// stays in f64 anyway.
pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter storing rationals as human-readable decimal strings.
pub mod serde_rational {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&to_decimal_string(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(de)?;
        parse_rational_string(&s)
            .ok_or_else(|| de::Error::custom(format!("not a rational value: {s:?}")))
    }
}
