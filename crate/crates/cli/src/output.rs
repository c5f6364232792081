//! CSV and JSON writers. Numbers carry 12 significant digits and lines end in LF.

use crate::error::CliError;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// `x` with 12 significant digits: positional notation for moderate
/// magnitudes, scientific otherwise. Trailing zeros are dropped.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if (-5..12).contains(&exponent) {
        let digits = (11 - exponent).max(0) as usize;
        trim_zeros(format!("{x:.digits$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// A CSV cell: either a number or a label.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| CliError::io(&path, e.into()))?;
        w.write_record(&self.header).map_err(|e| CliError::io(&path, e.into()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(|e| CliError::io(&path, e.into()))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Per-run summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub gate: String,
    pub duration_ns: Option<f64>,
    pub loss: Option<f64>,
    pub leakage: Option<f64>,
    pub fidelity: Option<f64>,
    pub params: serde_json::Map<String, serde_json::Value>,
    pub runtime_s: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e.into()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_number(35.00528619741234), "35.0052861974");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(-2.0), "-2");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.23456789012345e-7), "1.23456789012e-7");
        assert_eq!(format_number(6.02e23), "6.02e23");
        assert_eq!(format_number(0.000123456789012345), "0.000123456789012");
    }

    #[test]
    fn csv_uses_lf() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.5.into(), "x".into()]);
        let path = t.write(dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), "a,b\n1.5,x\n");
    }
}
