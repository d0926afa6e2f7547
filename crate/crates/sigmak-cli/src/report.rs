//! CSV tables and JSON reports written by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

/// One table cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Locale-independent scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// A CSV table with a mandatory header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A measured value checked against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub measured: Value,
    pub tolerance: Value,
}

impl Criterion {
    /// `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: measured <= tolerance,
            measured: Value::from(measured),
            tolerance: Value::from(tolerance),
        }
    }

    /// `measured ≥ bound`.
    pub fn at_least(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: measured >= bound,
            measured: Value::from(measured),
            tolerance: serde_json::json!({ "min": bound }),
        }
    }

    /// A yes/no property.
    pub fn holds(name: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            pass,
            measured: Value::from(pass),
            tolerance: Value::from(true),
        }
    }
}

/// Diagnostic payload of a numerical failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub message: String,
    pub diagnostics: Value,
}

/// Machine-readable outcome of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub config: RunConfig,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
    pub values: Value,
    pub failure: Option<Failure>,
}

/// Everything a subcommand produces.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub table: Table,
    pub criteria: Vec<Criterion>,
    pub values: Value,
    pub failure: Option<Failure>,
}

impl Artifacts {
    pub fn new(table: Table, criteria: Vec<Criterion>, values: Value) -> Self {
        Self {
            table,
            criteria,
            values,
            failure: None,
        }
    }

    pub fn pass(&self) -> bool {
        self.failure.is_none() && self.criteria.iter().all(|c| c.pass)
    }
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.report.json`.
pub fn write_artifacts(
    dir: &Path,
    name: &str,
    cfg: &RunConfig,
    art: &Artifacts,
) -> Result<(PathBuf, Report)> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    art.table.write(&dir.join(format!("{name}.csv")))?;
    let report = Report {
        subcommand: name.to_string(),
        config: cfg.clone(),
        pass: art.pass(),
        criteria: art.criteria.clone(),
        values: art.values.clone(),
        failure: art.failure.clone(),
    };
    let path = dir.join(format!("{name}.report.json"));
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok((path, report))
}
