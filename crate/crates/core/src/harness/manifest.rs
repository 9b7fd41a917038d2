use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|value| ≤ threshold`
    AbsAtMost,
    /// `|value| > threshold`
    AbsAbove,
    AtMost,
    AtLeast,
    Below,
    Above,
}

impl Comparison {
    pub fn holds(&self, value: f64, threshold: f64) -> bool {
        match self {
            Self::AbsAtMost => value.abs() <= threshold,
            Self::AbsAbove => value.abs() > threshold,
            Self::AtMost => value <= threshold,
            Self::AtLeast => value >= threshold,
            Self::Below => value < threshold,
            Self::Above => value > threshold,
        }
    }
}

/// A reported quantity with its standard error and the limit it is judged against.
/// `stderr` is 0 for exact or deterministic quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Metric {
    pub fn judge(name: impl Into<String>, value: f64, stderr: f64, comparison: Comparison, threshold: f64) -> Self {
        let passed = value.is_finite() && comparison.holds(value, threshold);
        Self { name: name.into(), value, stderr, comparison, threshold, passed }
    }
}

/// Rows of numbers under a header, written as plain CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row; floats use the shortest round-trip representation.
    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// A value that can sit in a table cell.
pub trait Cell {
    fn cell(&self) -> String;
}

// `Debug` is the shortest round-trip form and switches to exponents for tiny
// or huge magnitudes, unlike `Display`.
impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => { $(impl Cell for $t { fn cell(&self) -> String { self.to_string() } })* };
}
display_cell!(u32, u64, usize, i32, i64, str, String);

impl<T: Cell + ?Sized> Cell for &T {
    fn cell(&self) -> String {
        (**self).cell()
    }
}

/// Shorthand for building table rows from mixed values.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::harness::manifest::Cell::cell(&$x)),*] };
}

/// Metrics plus the data tables they were computed from.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub metrics: Vec<Metric>,
    pub tables: Vec<(String, Table)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        !self.metrics.is_empty() && self.metrics.iter().all(|m| m.passed)
    }

    pub fn extend(&mut self, other: Outcome) {
        self.metrics.extend(other.metrics);
        self.tables.extend(other.tables);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_s: f64,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    /// CSV files written next to the manifest.
    pub files: Vec<String>,
    pub passed: bool,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
