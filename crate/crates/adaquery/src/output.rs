//! Result tables, summaries and the files they are written to.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::RunError;

pub const SCHEMA_VERSION: u32 = 1;

/// A CSV table held as formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes the commented provenance block, the header and the rows.
    pub fn write(&self, path: &Path, provenance: &str) -> Result<(), RunError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        }
        let mut buf = Vec::new();
        for line in provenance.lines() {
            writeln!(buf, "# {line}").expect("write to memory");
        }
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|e| RunError::io(path, e))?;
        }
        fs::write(path, buf).map_err(|e| RunError::io(path, e))
    }
}

/// Cell formatting shared by every table: shortest round-trip floats.
pub fn cell<T: ToString>(v: T) -> String {
    v.to_string()
}

/// One configured threshold and whether the run met it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub op: &'static str,
    pub threshold: f64,
    pub passed: bool,
    pub enforced: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value, "<=", threshold, value <= threshold)
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value, ">=", threshold, value >= threshold)
    }

    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self::make(name, value, "<", threshold, value < threshold)
    }

    fn make(name: &str, value: f64, op: &'static str, threshold: f64, passed: bool) -> Self {
        Check {
            name: name.to_string(),
            value,
            op,
            threshold,
            passed,
            enforced: true,
        }
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub table: Option<Table>,
    /// Per-session tables, written under `<output>.<group>/<name>.csv`.
    pub session_tables: Vec<(String, String, Table)>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub failed_trials: usize,
}

impl Outcome {
    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn warn(&mut self, w: impl ToString) {
        let w = w.to_string();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.enforced)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub trials: usize,
    pub failed_trials: usize,
    pub passed: bool,
    pub metrics: &'a BTreeMap<String, f64>,
    pub assertions: &'a [Check],
    pub warnings: &'a [String],
}

pub struct Paths {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

pub fn paths(stem: &Path) -> Paths {
    let with = |suffix: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    Paths {
        csv: with(".csv"),
        summary: with(".summary.json"),
    }
}

pub fn session_path(stem: &Path, group: &str, name: &str) -> PathBuf {
    let mut dir = stem.as_os_str().to_owned();
    dir.push(".");
    dir.push(group);
    PathBuf::from(dir).join(format!("{name}.csv"))
}

pub fn write_summary(path: &Path, summary: &Summary<'_>) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| RunError::io(path, e))
}

/// Sorted-sample quantile with linear interpolation.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean and the usual quantiles under `prefix_*` names.
pub fn describe(outcome: &mut Outcome, prefix: &str, values: &[f64]) {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len().max(1) as f64;
    outcome.metric(&format!("{prefix}_mean"), mean);
    for (name, p) in [("q05", 0.05), ("q10", 0.10), ("median", 0.5), ("q90", 0.9), ("max", 1.0)] {
        outcome.metric(&format!("{prefix}_{name}"), quantile(&sorted, p));
    }
}

pub fn rate(flags: impl IntoIterator<Item = bool>) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in flags {
        total += 1;
        hit += f as usize;
    }
    if total == 0 {
        f64::NAN
    } else {
        hit as f64 / total as f64
    }
}
