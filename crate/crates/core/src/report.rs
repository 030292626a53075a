//! Deterministic JSON and CSV output.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! non-finite floats as `null`, and object keys in sorted order, so a report
//! is a pure function of its inputs.

use std::io::Write;

use serde::Serialize;
use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

/// Rewrites every float in `value` to 17 significant digits.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Number(n) => {
            let text = n.to_string();
            let is_float = text.contains(['.', 'e', 'E']);
            match (is_float, n.as_f64()) {
                (true, Some(x)) => float(x),
                _ => Value::Number(n),
            }
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// JSON value of a float with 17 significant digits; `null` if not finite.
pub fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    Value::Number(text.parse::<Number>().expect("formatted float is valid JSON"))
}

/// Canonical pretty JSON of any serializable value.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = canonicalize(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// SHA-256 of the compact, key-sorted JSON encoding of `value`.
pub fn content_hash(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("JSON values always serialize");
    hex::encode(Sha256::digest(bytes))
}

/// Writes rows as CSV; every row must have `header.len()` cells.
pub fn write_csv<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| if x.is_finite() { format!("{x:.16e}") } else { String::new() }))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_get_seventeen_digits() {
        let v = canonicalize(json!({"b": 0.1, "a": [1, -2.5e-300], "c": "text"}));
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"a":[1,-2.5000000000000000e-300],"b":1.0000000000000001e-1,"c":"text"}"#);
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(float(f64::NAN), Value::Null);
        assert_eq!(float(f64::INFINITY), Value::Null);
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"x": 1, "y": [2, 3]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y": [2, 3], "x": 1}"#).unwrap();
        assert_eq!(content_hash(&a), content_hash(&b));
        assert_eq!(content_hash(&a).len(), 64);
    }

    #[test]
    fn csv_round_trip() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["x".into(), "y".into()], &[vec![0.5, f64::NAN]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n5.0000000000000000e-1,\n");
    }
}
