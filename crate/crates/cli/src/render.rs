//! Output plumbing: number rendering, config headers and sinks.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{Map, Value};

/// Shortest decimal that round-trips to the same `f64`, switching to
/// exponent notation for very large or small magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Ordered `key=value` configuration echo.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: Vec<(String, Value)>,
}

impl Config {
    pub fn new(command: &str) -> Self {
        let mut c = Self::default();
        c.push("command", command);
        c
    }

    pub fn push(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    pub fn push_num(&mut self, key: &str, value: f64) -> &mut Self {
        self.push(key, value)
    }

    /// `# key=value ...` comment line for CSV outputs.
    pub fn csv_header(&self) -> String {
        let fields: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                Value::Number(n) => match n.as_f64() {
                    Some(f) if !n.is_u64() && !n.is_i64() => format!("{k}={}", num(f)),
                    _ => format!("{k}={n}"),
                },
                Value::Array(items) => format!(
                    "{k}={}",
                    items
                        .iter()
                        .map(|i| i.as_f64().map(num).unwrap_or_else(|| i.to_string()))
                        .collect::<Vec<_>>()
                        .join(",")
                ),
                other => format!("{k}={other}"),
            })
            .collect();
        format!("# kflat {}", fields.join(" "))
    }

    pub fn json(&self) -> Value {
        let map: Map<String, Value> = self.entries.iter().cloned().collect();
        Value::Object(map)
    }
}

pub fn open_sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json(out: &mut dyn Write, value: &Value) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}
