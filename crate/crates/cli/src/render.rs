//! Plain-text rendering of a report document.

use std::fmt::Write;

use serde_json::Value;

pub fn render(doc: &Value) -> String {
    let mut out = String::new();
    if let Some(cmd) = doc.get("command").and_then(Value::as_str) {
        writeln!(out, "== {cmd} ==").unwrap();
    }
    if let Value::Object(map) = doc {
        for (key, value) in map.iter().filter(|(k, _)| *k != "command" && *k != "methods") {
            field(&mut out, key, value, 0);
        }
        if let Some(Value::Object(methods)) = doc.get("methods") {
            writeln!(out, "\nmethods:").unwrap();
            for (key, text) in methods {
                writeln!(out, "  {key}: {}", text.as_str().unwrap_or_default()).unwrap();
            }
        }
    }
    out
}

fn number(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if v.is_f64() && x != 0.0 && !(1e-4..1e6).contains(&x.abs()) => format!("{x:.4e}"),
        Some(x) if v.is_f64() => format!("{x:.6}"),
        _ => v.to_string(),
    }
}

fn field(out: &mut String, key: &str, value: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match value {
        Value::Object(map) if map.get("rows").is_some() => {
            writeln!(out, "{pad}{key}:").unwrap();
            for row in map["rows"].as_array().into_iter().flatten() {
                let cells: Vec<String> =
                    row.as_array().into_iter().flatten().map(|v| format!("{:>10}", number(v))).collect();
                writeln!(out, "{pad}  {}", cells.join(" ")).unwrap();
            }
        }
        Value::Object(map) => {
            writeln!(out, "{pad}{key}:").unwrap();
            for (k, v) in map {
                field(out, k, v, depth + 1);
            }
        }
        Value::Array(items) if items.iter().all(|v| !v.is_object()) => {
            let parts: Vec<String> = items.iter().map(compact).collect();
            writeln!(out, "{pad}{key}: [{}]", parts.join(", ")).unwrap();
        }
        Value::Array(items) => {
            writeln!(out, "{pad}{key}:").unwrap();
            for item in items {
                writeln!(out, "{pad}  {}", compact(item)).unwrap();
            }
        }
        Value::Null => writeln!(out, "{pad}{key}: -").unwrap(),
        other => writeln!(out, "{pad}{key}: {}", compact(other)).unwrap(),
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::Number(_) => number(v),
        Value::String(s) => s.clone(),
        Value::Array(items) => format!("[{}]", items.iter().map(compact).collect::<Vec<_>>().join(", ")),
        Value::Object(map) => {
            let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k}={}", compact(v))).collect();
            parts.join(" ")
        }
        other => other.to_string(),
    }
}
