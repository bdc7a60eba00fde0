//! Exact rational helpers shared by every engine.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `7`, `-3`, `3/4` and finite decimals such as `1.25`.
pub fn parse(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().ok()?;
        let den: BigInt = den.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() && whole_digits.is_empty() {
            return None;
        }
        if !whole_digits.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return None;
        }
        let digits = format!("{whole_digits}{frac}");
        let mut num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
        if negative {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Some(Rational::new(num, den));
    }
    let num: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(num))
}

/// Exact text form: `p` for integers, `p/q` otherwise.
pub fn format(value: &Rational) -> String {
    value.to_string()
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        if value.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Shortest decimal that round-trips through `f64`, used for plot-oriented CSV output.
pub fn format_decimal(value: &Rational) -> String {
    format!("{}", to_f64(value))
}

/// `None` stands for +infinity.
pub fn format_extended(value: Option<&Rational>) -> String {
    match value {
        Some(v) => format(v),
        None => "inf".to_string(),
    }
}

pub fn parse_extended(text: &str) -> Option<Option<Rational>> {
    match text.trim() {
        "inf" | "∞" | "+inf" => Some(None),
        other => parse(other).map(Some),
    }
}

pub fn is_integer(value: &Rational) -> bool {
    value.is_integer()
}

/// Componentwise product-sum `Σ a_i · b_i`.
pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}
