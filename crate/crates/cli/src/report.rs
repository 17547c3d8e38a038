//! Report assembly and output formats.
//!
//! Reports are built as JSON trees with a fixed top-level shape
//! `{metric, config, points, classes, identities, timing}` and then rendered
//! as JSON, plain text, or CSV. Every floating-point number in a JSON or CSV
//! report is printed with 17 significant digits in scientific notation, and
//! map keys are sorted, so runs with equal configurations produce
//! byte-identical reports. Wall-clock timing goes to stderr and the JSON
//! `timing` field stays `null` to keep that guarantee.

use std::io::{self, Write as _};
use std::path::PathBuf;

use clap::ValueEnum;
use finsler::error::Result;
use serde::Serialize;
use serde_json::{json, Map, Value};

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// One identity check: the worst residual over the sampled points against a
/// fixed bound.
#[derive(Clone, Serialize)]
pub struct IdentityRow {
    pub name: String,
    pub residual: f64,
    pub bound: f64,
    pub verdict: bool,
}

impl IdentityRow {
    pub fn new(name: impl Into<String>, residual: f64, bound: f64) -> IdentityRow {
        IdentityRow { name: name.into(), residual, bound, verdict: residual < bound }
    }
}

/// Formatter that writes every float with 17 significant digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.7e}")
    }
}

/// Serializes a JSON tree with deterministic float formatting.
pub fn json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("serializing an in-memory JSON tree cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

/// Full-precision float for CSV cells.
pub fn csv_num(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// The shared top-level report shape; commands fill in the variable parts.
pub fn base_document(
    metric: &str,
    config: Value,
    points: Value,
    classes: Value,
    identities: Value,
) -> Value {
    let mut map = Map::new();
    map.insert("metric".into(), json!(metric));
    map.insert("config".into(), config);
    map.insert("points".into(), points);
    map.insert("classes".into(), classes);
    map.insert("identities".into(), identities);
    map.insert("timing".into(), Value::Null);
    Value::Object(map)
}

/// Sampled states as `{index, x, y}` records.
pub fn points_json(states: &[finsler::geometry::StatePoint]) -> Value {
    Value::Array(
        states
            .iter()
            .enumerate()
            .map(|(index, st)| json!({ "index": index, "x": st.x, "y": st.y }))
            .collect(),
    )
}

pub fn identities_json(rows: &[IdentityRow]) -> Value {
    serde_json::to_value(rows).expect("identity rows serialize to JSON")
}

/// Renders identity rows as an aligned text table.
pub fn identities_text(rows: &[IdentityRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(8).max(8);
    let mut out = String::new();
    out.push_str(&format!(
        "{:<width$}  {:>13}  {:>9}  verdict\n",
        "identity", "residual", "bound"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<width$}  {:>13.4e}  {:>9.1e}  {}\n",
            row.name,
            row.residual,
            row.bound,
            verdict_word(row.verdict)
        ));
    }
    let passed = rows.iter().filter(|r| r.verdict).count();
    out.push_str(&format!(
        "{} rows: {} pass, {} fail\n",
        rows.len(),
        passed,
        rows.len() - passed
    ));
    out
}

pub fn identities_csv(rows: &[IdentityRow]) -> String {
    let mut out = String::from("name,residual,bound,verdict\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.name,
            csv_num(row.residual),
            csv_num(row.bound),
            verdict_word(row.verdict)
        ));
    }
    out
}

/// Writes the report to `--out` or stdout.
pub fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}
