//! Exact ruble amounts with three fractional digits.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SCALE: i64 = 1000;

/// A money amount in rubles, stored as an integer count of thousandths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rubles(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid ruble amount {0:?}")]
pub struct ParseRublesError(pub String);

impl Rubles {
    pub const ZERO: Rubles = Rubles(0);

    pub const fn from_millis(millis: i64) -> Self {
        Rubles(millis)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest thousandth. Returns `None` for non-finite input.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let scaled = (value * SCALE as f64).round();
        if scaled.abs() > i64::MAX as f64 / 2.0 {
            return None;
        }
        Some(Rubles(scaled as i64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Rubles {
    type Output = Rubles;

    fn add(self, rhs: Rubles) -> Rubles {
        Rubles(self.0 + rhs.0)
    }
}

impl Mul<i64> for Rubles {
    type Output = Rubles;

    fn mul(self, rhs: i64) -> Rubles {
        Rubles(self.0 * rhs)
    }
}

impl Sum for Rubles {
    fn sum<I: Iterator<Item = Rubles>>(iter: I) -> Rubles {
        iter.fold(Rubles::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Rubles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if frac == 0 {
            return write!(f, "{sign}{whole}");
        }
        let digits = format!("{frac:03}");
        write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

/// Accepts `7.627`, `7,627`, `-1`, `2.5`. More than three fractional digits is an error.
impl FromStr for Rubles {
    type Err = ParseRublesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRublesError(s.to_string());
        let trimmed = s.trim();
        let (negative, body) = match trimmed.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, trimmed.strip_prefix('+').unwrap_or(trimmed)),
        };
        let body = body.replace(',', ".");
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body.as_str(), ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        if frac.len() > 3 {
            return Err(err());
        }
        let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| err())? };
        let mut frac_millis: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
        for _ in frac.len()..3 {
            frac_millis *= 10;
        }
        let millis = whole
            .checked_mul(SCALE)
            .and_then(|w| w.checked_add(frac_millis))
            .ok_or_else(err)?;
        Ok(Rubles(if negative { -millis } else { millis }))
    }
}

impl Serialize for Rubles {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rubles {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RublesVisitor;

        impl Visitor<'_> for RublesVisitor {
            type Value = Rubles;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a ruble amount as a number or decimal string")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rubles, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rubles, E> {
                v.checked_mul(SCALE)
                    .map(Rubles)
                    .ok_or_else(|| E::custom("ruble amount out of range"))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rubles, E> {
                i64::try_from(v)
                    .map_err(|_| E::custom("ruble amount out of range"))
                    .and_then(|v| self.visit_i64(v))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rubles, E> {
                let millis = v * SCALE as f64;
                if (millis - millis.round()).abs() > 1e-6 {
                    return Err(E::custom(format!("{v} has more than three fractional digits")));
                }
                Rubles::from_f64(v).ok_or_else(|| E::custom("ruble amount out of range"))
            }
        }

        deserializer.deserialize_any(RublesVisitor)
    }
}
