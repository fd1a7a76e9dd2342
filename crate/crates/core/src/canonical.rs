//! Deterministic JSON text.
//!
//! - object keys sorted by code point, recursively
//! - arrays keep their order
//! - no insignificant whitespace
//! - integer-valued floats render as integers (`2.0` -> `2`, `-0.0` -> `0`)
//!
//! The writer walks the tree itself instead of relying on `serde_json::Map`
//! ordering, so the output does not depend on the `preserve_order` feature.

use serde_json::{Number, Value};
use std::fmt::Write;

/// Render `value` in canonical form.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

/// Canonical form of an argument map or any other JSON object.
pub fn canonical_object(map: &serde_json::Map<String, Value>) -> String {
    let mut out = String::new();
    write_object(&mut out, map);
    out
}

fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => write_object(out, map),
    }
}

fn write_object(out: &mut String, map: &serde_json::Map<String, Value>) {
    let mut entries: Vec<(&String, &Value)> = map.iter().collect();
    // String ordering is byte-wise on UTF-8, which coincides with code point order.
    entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
    out.push('{');
    for (i, (key, val)) in entries.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_string(out, key);
        out.push(':');
        write_value(out, val);
    }
    out.push('}');
}

fn write_string(out: &mut String, s: &str) {
    // serializing a &str cannot fail
    out.push_str(&serde_json::to_string(s).expect("string serialization"));
}

const I64_BOUND: f64 = 9_223_372_036_854_775_808.0; // 2^63
const U64_BOUND: f64 = 18_446_744_073_709_551_616.0; // 2^64

fn write_number(out: &mut String, n: &Number) {
    if let Some(i) = n.as_i64() {
        let _ = write!(out, "{i}");
        return;
    }
    if let Some(u) = n.as_u64() {
        let _ = write!(out, "{u}");
        return;
    }
    let f = n.as_f64().unwrap_or(f64::NAN);
    if f.is_finite() && f.fract() == 0.0 {
        if f.abs() < I64_BOUND {
            let _ = write!(out, "{}", f as i64);
            return;
        }
        if f > 0.0 && f < U64_BOUND {
            let _ = write!(out, "{}", f as u64);
            return;
        }
    }
    out.push_str(&n.to_string());
}
