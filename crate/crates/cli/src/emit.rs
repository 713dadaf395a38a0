//! Deterministic report rendering: objects with sorted keys, floats printed
//! with 17 significant digits so reruns are byte-identical and values
//! round-trip exactly. Non-finite rates are emitted as the strings "inf" /
//! "-inf" (JSON numbers cannot carry them).

use std::io::Write;

use serde_json::Value;

use crate::error::CliError;

/// Wraps a float for a report; non-finite values become strings.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(x).map(Value::Number).unwrap()
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn jarr(values: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(values.into_iter().map(jnum).collect())
}

pub fn jmatrix(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|row| jarr(row.iter().copied())).collect())
}

/// 17-significant-digit float literal, valid JSON.
pub fn float_repr(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders with sorted object keys (serde_json's default map) and fixed
/// float formatting, 2-space indentation.
pub fn render(value: &Value) -> String {
    let mut out = String::new();
    render_into(value, 0, &mut out);
    out.push('\n');
    out
}

fn render_into(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&float_repr(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                render_into(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                render_into(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

/// Writes to the given path, or stdout when `None` or `-`.
pub fn write_output(path: Option<&str>, content: &str) -> Result<(), CliError> {
    match path {
        None | Some("-") => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, content)?;
            Ok(())
        }
    }
}
