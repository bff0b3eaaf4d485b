//! Exact rationals and their JSON rendering.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn zero() -> Rational {
    Rational::zero()
}

/// Display-only decimal, rounded to 6 significant digits.
pub fn decimal(r: &Rational) -> f64 {
    let x = r.to_f64().unwrap_or(f64::NAN);
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Parses decimal literals such as `12`, `-0.25` or `3/4`.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        return (!d.is_zero()).then(|| Rational::new(n, d));
    }
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mantissa: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = BigInt::from(10u32).pow(frac.len() as u32);
    let r = Rational::new(mantissa, scale);
    Some(if negative { -r } else { r })
}

/// `{"num": …, "den": …, "decimal": …}`; numerator and denominator are
/// strings only when they do not fit in 64 bits.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalJson(pub Rational);

impl Serialize for RationalJson {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Rational", 3)?;
        match (self.0.numer().to_i64(), self.0.denom().to_i64()) {
            (Some(n), Some(d)) => {
                st.serialize_field("num", &n)?;
                st.serialize_field("den", &d)?;
            }
            _ => {
                st.serialize_field("num", &self.0.numer().to_string())?;
                st.serialize_field("den", &self.0.denom().to_string())?;
            }
        }
        st.serialize_field("decimal", &decimal(&self.0))?;
        st.end()
    }
}

/// `serialize_with` helper.
pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    RationalJson(r.clone()).serialize(s)
}

/// `a/b` or an integer.
pub fn display(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn is_in_unit_interval(r: &Rational) -> bool {
    !r.is_negative() && *r <= one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals() {
        assert_eq!(decimal(&ratio(21, 32)), 0.65625);
        assert_eq!(decimal(&ratio(1, 3)), 0.333333);
        assert_eq!(decimal(&ratio(2, 3)), 0.666667);
        assert_eq!(decimal(&zero()), 0.0);
    }

    #[test]
    fn parse() {
        assert_eq!(parse_decimal("12"), Some(integer(12)));
        assert_eq!(parse_decimal("-0.25"), Some(ratio(-1, 4)));
        assert_eq!(parse_decimal("3/4"), Some(ratio(3, 4)));
        assert_eq!(parse_decimal(".5"), Some(ratio(1, 2)));
        assert_eq!(parse_decimal("abc"), None);
        assert_eq!(parse_decimal("1/0"), None);
        assert_eq!(parse_decimal("-"), None);
    }

    #[test]
    fn json() {
        let v = serde_json::to_string(&RationalJson(ratio(9, 16))).unwrap();
        assert_eq!(v, r#"{"num":9,"den":16,"decimal":0.5625}"#);
    }
}
