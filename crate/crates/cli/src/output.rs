//! File writers. Every file carries the hash of the config it came from.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};
use twopoint_core::diagnostics::{DiagnosticsSeries, FunctionalValues};
use twopoint_core::solver::TrajectoryRecord;

use crate::config::{ExperimentConfig, Format, OutputConfig};
use crate::CliError;

/// SHA-256 of the canonical TOML, with the output settings left out so that
/// the same experiment hashes equally wherever it is written.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut canonical = config.clone();
    canonical.outputs = OutputConfig::default();
    hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// JSON number with 17 significant digits; `null` when not finite.
pub fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(fmt_f64(v).parse::<Number>().expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

fn normalize(value: Value) -> Value {
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => n.as_f64().map_or(Value::Null, json_f64),
        Value::Array(items) => Value::Array(items.into_iter().map(normalize).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// Serializes to a JSON tree with every float written at full precision.
pub fn to_json<T: Serialize>(value: &T) -> Value {
    normalize(serde_json::to_value(value).expect("value serializes to JSON"))
}

pub const SERIES_COLUMNS: [&str; 16] = [
    "t", "E", "H", "I", "J", "Phi", "psi", "L", "script_L", "max_abs_u", "u_sq", "ux_sq", "lp_p", "v_sq",
    "u_left", "u_right",
];

fn series_row(v: &FunctionalValues, max_abs_u: f64) -> [Option<f64>; 16] {
    let n = &v.norms;
    [
        Some(v.t),
        Some(v.e),
        v.h,
        Some(v.i),
        Some(v.j),
        v.phi,
        Some(v.psi),
        v.l_blowup,
        Some(v.script_l),
        Some(max_abs_u),
        Some(n.u_sq),
        Some(n.ux_sq),
        Some(n.lp_p),
        Some(n.v_sq),
        Some(n.u_left),
        Some(n.u_right),
    ]
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes a CSV whose first line declares the config hash.
pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = format!("# config_hash: {hash}\n{}\n", header.join(","));
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write(path, &out)
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON tree serializes");
    text.push('\n');
    write(path, &text)
}

/// Functional series and nodal snapshots of a trajectory.
pub fn write_trajectory(
    dir: &Path,
    format: Format,
    hash: &str,
    record: &TrajectoryRecord,
    series: &DiagnosticsSeries,
) -> Result<Vec<String>, CliError> {
    let series_rows: Vec<[Option<f64>; 16]> = series
        .values
        .iter()
        .zip(&record.snapshots)
        .map(|(v, s)| series_row(v, s.sup_u()))
        .collect();
    let width = record.snapshots.first().map_or(0, |s| s.u.len());
    let mut snap_header = vec!["t".to_string()];
    snap_header.extend((0..width).map(|j| format!("x_{j}")));
    match format {
        Format::Csv => {
            let rows: Vec<Vec<String>> = series_rows.iter().map(|r| r.iter().map(|v| fmt_opt(*v)).collect()).collect();
            write_csv(&dir.join("series.csv"), hash, &SERIES_COLUMNS, &rows)?;
            let rows: Vec<Vec<String>> = record
                .snapshots
                .iter()
                .map(|s| std::iter::once(s.t).chain(s.u.iter().copied()).map(fmt_f64).collect())
                .collect();
            let header: Vec<&str> = snap_header.iter().map(String::as_str).collect();
            write_csv(&dir.join("snapshots.csv"), hash, &header, &rows)?;
            Ok(vec!["series.csv".into(), "snapshots.csv".into()])
        }
        Format::Json => {
            let columns: Map<String, Value> = SERIES_COLUMNS
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    let col = series_rows.iter().map(|r| r[c].map_or(Value::Null, json_f64)).collect();
                    (name.to_string(), Value::Array(col))
                })
                .collect();
            let mut doc = Map::new();
            doc.insert("config_hash".into(), Value::String(hash.into()));
            doc.insert("columns".into(), Value::Object(columns));
            write_json(&dir.join("series.json"), &Value::Object(doc))?;
            let snapshots: Vec<Value> = record
                .snapshots
                .iter()
                .map(|s| {
                    let mut m = Map::new();
                    m.insert("t".into(), json_f64(s.t));
                    m.insert("u".into(), Value::Array(s.u.iter().map(|&u| json_f64(u)).collect()));
                    Value::Object(m)
                })
                .collect();
            let mut doc = Map::new();
            doc.insert("config_hash".into(), Value::String(hash.into()));
            doc.insert("snapshots".into(), Value::Array(snapshots));
            write_json(&dir.join("snapshots.json"), &Value::Object(doc))?;
            Ok(vec!["series.json".into(), "snapshots.json".into()])
        }
    }
}

/// Renders rows of optional numbers and free text as CSV cells.
pub fn cells(values: &[Option<f64>], text: &[&str]) -> Vec<String> {
    let mut row: Vec<String> = values.iter().map(|v| fmt_opt(*v)).collect();
    row.extend(text.iter().map(|s| csv_text(s)));
    row
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        let mut out = String::from("\"");
        for ch in s.chars() {
            if ch == '"' {
                out.push('"');
            }
            out.push(ch);
        }
        out.push('"');
        out
    } else {
        s.to_string()
    }
}

/// Joins assignments like `grid.n=20` for sweep indexes.
pub fn describe_assignments(assignments: &[(String, toml::Value)]) -> String {
    let mut out = String::new();
    for (i, (k, v)) in assignments.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{k}={v}");
    }
    out
}
