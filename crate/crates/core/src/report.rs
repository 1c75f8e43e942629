//! Machine-readable report pieces: header block, per-check JSON blocks and
//! CSV tables.
//!
//! JSON objects go through `serde_json::Value`, whose maps are ordered, so
//! keys always come out sorted. CSV uses `,` separators, `.` decimals and
//! `\n` line ends. The only run-dependent field, the timestamp, lives in
//! the header so report bodies are byte-identical for equal seeds.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "reslevy";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed header recorded at the top of every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Every tolerance and numerical control in effect.
    pub tolerances: BTreeMap<String, f64>,
    /// Wall-clock time of the run; excluded from the body.
    pub timestamp: Option<String>,
}

impl ReportHeader {
    pub fn new(command: &str, seed: u64) -> Self {
        ReportHeader {
            tool: TOOL_NAME.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            seed,
            tolerances: BTreeMap::new(),
            timestamp: None,
        }
    }

    pub fn tolerance(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    /// Header as `# key,value` comment lines for CSV files.
    pub fn csv_lines(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool,{}\n", self.tool));
        out.push_str(&format!("# version,{}\n", self.version));
        out.push_str(&format!("# command,{}\n", self.command));
        out.push_str(&format!("# seed,{}\n", self.seed));
        for (k, v) in &self.tolerances {
            out.push_str(&format!("# tol.{k},{v}\n"));
        }
        if let Some(ts) = &self.timestamp {
            out.push_str(&format!("# timestamp,{ts}\n"));
        }
        out
    }
}

/// One JSON block per verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckBlock {
    pub check: String,
    pub model: Value,
    pub params: Value,
    pub n: usize,
    pub seed: u64,
    pub result: Value,
    pub pass: bool,
}

impl CheckBlock {
    pub fn new(
        check: &str,
        model: impl Serialize,
        params: impl Serialize,
        n: usize,
        seed: u64,
        result: impl Serialize,
        pass: bool,
    ) -> Result<Self> {
        Ok(CheckBlock {
            check: check.to_string(),
            model: to_value(model)?,
            params: to_value(params)?,
            n,
            seed,
            result: to_value(result)?,
            pass,
        })
    }
}

pub fn to_value(v: impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::numerical("json", e.to_string()))
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_sorted_json(v: impl Serialize) -> Result<String> {
    let value = to_value(v)?;
    let mut s = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::numerical("json", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// A complete JSON report: `{"header": ..., "body": ...}`. The header
/// comes first in the file; keys inside each part are sorted.
pub fn json_report(header: &ReportHeader, body: impl Serialize) -> Result<String> {
    let part = |v: Value| -> Result<String> {
        let s = serde_json::to_string_pretty(&v)
            .map_err(|e| Error::numerical("json", e.to_string()))?;
        Ok(s.replace('\n', "\n  "))
    };
    Ok(format!(
        "{{\n  \"header\": {},\n  \"body\": {}\n}}\n",
        part(to_value(header)?)?,
        part(to_value(body)?)?
    ))
}

/// The body of a JSON report produced by [`json_report`], re-serialized;
/// equal for equal seeds regardless of the timestamp.
pub fn json_report_body(report: &str) -> Result<String> {
    let v: Value =
        serde_json::from_str(report).map_err(|e| Error::numerical("json", e.to_string()))?;
    to_sorted_json(v.get("body").cloned().unwrap_or(Value::Null))
}

/// Strip `#` header lines from a CSV report.
pub fn csv_body(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect()
}

/// Incremental CSV table writer.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Render with the header block first.
    pub fn render(&self, header: &ReportHeader) -> String {
        let mut out = header.csv_lines();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Float formatting for CSV cells: shortest round-trip representation.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
