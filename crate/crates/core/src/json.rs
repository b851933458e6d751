//! JSON number formatting for reports.
//!
//! Report numbers are written in scientific notation using the shortest
//! representation that round-trips, padded to at least nine significant
//! digits. Non-finite values become `null`.

use serde::Serializer;
use serde_json::value::RawValue;

const MIN_DIGITS: usize = 9;

pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    let shortest = format!("{x:e}");
    let (mantissa, exponent) = shortest.split_once('e').expect("exponent form");
    let digits = mantissa.chars().filter(char::is_ascii_digit).count();
    let mut out = mantissa.to_string();
    if digits < MIN_DIGITS {
        if !out.contains('.') {
            out.push('.');
        }
        out.extend(std::iter::repeat_n('0', MIN_DIGITS - digits));
    }
    format!("{out}e{exponent}")
}

pub fn number<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format_number(*x)).map_err(serde::ser::Error::custom)?;
    serde::Serialize::serialize(&raw, s)
}

pub fn optional_number<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => number(v, s),
        None => s.serialize_none(),
    }
}
