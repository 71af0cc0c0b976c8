//! Table rendering: CSV is the canonical human-facing format, JSON carries
//! the same rows at full float precision.
//!
//! CSV conventions: UTF-8, LF line endings, a header row, and a leading
//! `config_hash` column echoed on every data row. Probabilities print with
//! five decimals, times with six, and diagnostic values in scientific
//! notation; missing cells are empty.

use std::path::Path;

use crate::error::CliError;

/// One typed value; the type picks the CSV formatting.
#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    /// Probability-like value, rendered `%.5f`.
    Prob(f64),
    /// Time- or duration-like value, rendered `%.6f`.
    Time(f64),
    /// Diagnostic value of arbitrary magnitude, rendered `%.12e`.
    Sci(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn render_csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Prob(v) => format!("{v:.5}"),
            Cell::Time(v) => format!("{v:.6}"),
            Cell::Sci(v) => format!("{v:.12e}"),
            Cell::Text(s) => {
                debug_assert!(!s.contains([',', '\n']), "cell text must not need quoting");
                s.clone()
            }
            Cell::Empty => String::new(),
        }
    }

    fn render_json(&self) -> serde_json::Value {
        use serde_json::Value;
        let float = |v: f64| {
            serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
        };
        match self {
            Cell::Int(v) => Value::Number((*v).into()),
            Cell::Prob(v) | Cell::Time(v) | Cell::Sci(v) => float(*v),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

/// An experiment result: named columns plus the configuration digest that
/// every row echoes.
#[derive(Clone, Debug)]
pub struct Table {
    pub config_hash: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(config_hash: String, columns: Vec<&'static str>) -> Self {
        Table { config_hash, columns, rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("config_hash");
        for col in &self.columns {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&self.config_hash);
            for cell in row {
                out.push(',');
                out.push_str(&cell.render_csv());
            }
            out.push('\n');
        }
        out
    }

    /// `{"config_hash": ..., "rows": [...]}` with one object per row.
    /// Object keys are serialized in sorted order.
    pub fn to_json(&self) -> String {
        use serde_json::{Map, Value};
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (col, cell) in self.columns.iter().zip(row) {
                    obj.insert((*col).to_string(), cell.render_json());
                }
                Value::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("config_hash".to_string(), Value::String(self.config_hash.clone()));
        top.insert("rows".to_string(), Value::Array(rows));
        let mut text = serde_json::to_string_pretty(&Value::Object(top))
            .expect("json serialization of plain values cannot fail");
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path, format: crate::config::OutputFormat) -> Result<(), CliError> {
        let body = match format {
            crate::config::OutputFormat::Csv => self.to_csv(),
            crate::config::OutputFormat::Json => self.to_json(),
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, body)?;
        Ok(())
    }
}
