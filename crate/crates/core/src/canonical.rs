//! Canonical JSON writer: byte-identical output for logically equal
//! documents across runs and platforms.
//!
//! Rules: object keys sorted ascending; compact separators (no whitespace);
//! floats with |x| in [1e-4, 1e16) printed fixed-point with 17 significant
//! digits, everything else in `{:.16e}` exponent form, trailing zeros (and a
//! bare trailing dot) trimmed; negative zero prints as `0`; non-finite
//! numbers are an error; strings use serde_json's escaping. The writer emits
//! no newlines — callers add a final LF per document or JSONL record.

use serde_json::Value;

use crate::error::{CoreError, Result};

/// Serialize any JSON value canonically.
pub fn to_canonical_string(value: &Value) -> Result<String> {
    let mut out = String::new();
    write_value(&mut out, value)?;
    Ok(out)
}

/// Serialize anything serde can turn into JSON, canonically.
pub fn canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    to_canonical_string(&serde_json::to_value(value)?)
}

fn write_value(out: &mut String, v: &Value) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let x = n.as_f64().ok_or_else(|| CoreError::NonFiniteValue {
                    context: format!("unrepresentable number {n}"),
                })?;
                out.push_str(&format_float(x)?);
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(
                    &serde_json::to_string(key).expect("string serialization is infallible"),
                );
                out.push(':');
                write_value(out, &map[*key])?;
            }
            out.push('}');
        }
    }
    Ok(())
}

// Decade table for the fixed-point range: DECADES[i] = 10^(i - 4), so that
// exponent lookup is exact float comparison, not a libm log.
const DECADES: [f64; 21] = [
    1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12,
    1e13, 1e14, 1e15, 1e16,
];

/// Largest e with 10^e <= a, for a in [1e-4, 1e16).
fn decade_exponent(a: f64) -> i32 {
    let mut e = -4i32;
    for (i, &d) in DECADES.iter().enumerate().skip(1) {
        if a >= d {
            e = i as i32 - 4;
        } else {
            break;
        }
    }
    e
}

/// Canonical text for one float per the module rules.
pub fn format_float(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(CoreError::NonFiniteValue {
            context: format!("cannot serialize {x}"),
        });
    }
    if x == 0.0 {
        return Ok("0".to_string());
    }
    let a = x.abs();
    if (1e-4..1e16).contains(&a) {
        let precision = (16 - decade_exponent(a)).max(0) as usize;
        let mut s = format!("{x:.precision$}");
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        Ok(s)
    } else {
        let s = format!("{x:.16e}");
        let (mantissa, exponent) = s.split_once('e').expect("{:e} always contains e");
        let mut m = mantissa.to_string();
        if m.contains('.') {
            while m.ends_with('0') {
                m.pop();
            }
            if m.ends_with('.') {
                m.pop();
            }
        }
        Ok(format!("{m}e{exponent}"))
    }
}
