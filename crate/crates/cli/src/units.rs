//! Quantities with optional unit suffixes, e.g. `"2.5 MHz"`, `"0.1w"`, `"20mK"`.
//!
//! Bare numbers are rad/s for frequencies and kelvin for temperatures.
//! The suffix `w` means multiples of the mechanical frequency; `nbar` gives a
//! temperature as a thermal phonon occupation.

use std::f64::consts::PI;
use std::fmt;

use blockade_core::SystemParams;
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// A number, or a string holding a number and a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

impl From<&str> for Quantity {
    fn from(s: &str) -> Self {
        match s.trim().parse::<f64>() {
            Ok(v) => Quantity::Number(v),
            Err(_) => Quantity::Text(s.trim().to_string()),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Number(v) => write!(f, "{v}"),
            Quantity::Text(s) => f.write_str(s),
        }
    }
}

/// Splits `"1.5e6 Hz"` into `(1.5e6, "Hz")`.
fn split_number(text: &str) -> Option<(f64, &str)> {
    let s = text.trim();
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i == digits_start {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    let value = s[..i].parse().ok()?;
    Some((value, s[i..].trim()))
}

fn bad(field: &str, q: &Quantity, why: &str) -> UsageError {
    UsageError(format!("{field}: cannot read {q:?}: {why}"))
}

/// Frequency in rad/s; `omega_m` resolves the `w` suffix.
pub fn frequency(field: &str, q: &Quantity, omega_m: Option<f64>) -> Result<f64, UsageError> {
    let (value, unit) = match q {
        Quantity::Number(v) => (*v, ""),
        Quantity::Text(s) => split_number(s).ok_or_else(|| bad(field, q, "expected a number"))?,
    };
    let scale = match unit {
        "" | "rad/s" => 1.0,
        "Hz" => 2.0 * PI,
        "kHz" => 2.0 * PI * 1e3,
        "MHz" => 2.0 * PI * 1e6,
        "GHz" => 2.0 * PI * 1e9,
        "w" | "w_m" | "omega_m" => omega_m.ok_or_else(|| bad(field, q, "omega_m cannot be given in its own units"))?,
        other => return Err(bad(field, q, &format!("unknown frequency unit '{other}'"))),
    };
    Ok(value * scale)
}

/// Temperature in kelvin; the `nbar` suffix converts a phonon occupation at `omega_m`.
pub fn temperature(field: &str, q: &Quantity, omega_m: f64) -> Result<f64, UsageError> {
    let (value, unit) = match q {
        Quantity::Number(v) => (*v, ""),
        Quantity::Text(s) => split_number(s).ok_or_else(|| bad(field, q, "expected a number"))?,
    };
    match unit {
        "" | "K" => Ok(value),
        "mK" => Ok(value * 1e-3),
        "uK" => Ok(value * 1e-6),
        "nK" => Ok(value * 1e-9),
        "nbar" => {
            if value < 0.0 {
                return Err(bad(field, q, "occupation must be >= 0"));
            }
            Ok(SystemParams::new(0.0, omega_m, 1.0).with_nbar(value).temperature)
        }
        other => Err(bad(field, q, &format!("unknown temperature unit '{other}'"))),
    }
}

/// Quality factor: a number or `"inf"`.
pub fn quality(field: &str, q: &Quantity) -> Result<f64, UsageError> {
    match q {
        Quantity::Number(v) => Ok(*v),
        Quantity::Text(s) if matches!(s.trim(), "inf" | "infinity" | "Inf" | "INF") => Ok(f64::INFINITY),
        Quantity::Text(s) => s.trim().parse().map_err(|_| bad(field, q, "expected a number or 'inf'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_and_suffixes() {
        assert_eq!(split_number("1.5e6 Hz"), Some((1.5e6, "Hz")));
        assert_eq!(split_number("-0.25w"), Some((-0.25, "w")));
        assert_eq!(split_number("2e"), Some((2.0, "e")));
        assert_eq!(split_number("MHz"), None);
        let f = frequency("kappa", &"1 MHz".into(), None).unwrap();
        assert!((f - 2.0 * PI * 1e6).abs() < 1e-6);
        assert_eq!(frequency("kappa", &"0.1w".into(), Some(20.0)).unwrap(), 2.0);
        assert!(frequency("omega_m", &"1w".into(), None).is_err());
        assert!(frequency("kappa", &"3 parsecs".into(), None).is_err());
        assert_eq!(temperature("T", &"20mK".into(), 1.0).unwrap(), 0.02);
        assert_eq!(quality("Q", &"inf".into()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn occupation_suffix_round_trips() {
        let t = temperature("T", &"0.5nbar".into(), 1e7).unwrap();
        let p = SystemParams::new(0.0, 1e7, 1.0).with_temperature(t);
        assert!((p.nbar() - 0.5).abs() < 1e-12);
    }
}
