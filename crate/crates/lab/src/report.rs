//! Report rows, data tables and the files they are written to.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const RESULTS_HEADER: [&str; 10] = [
    "experiment",
    "check",
    "quantity",
    "parameters",
    "measured",
    "target",
    "tag",
    "reference",
    "tolerance",
    "pass",
];

/// Where a target comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    /// A value or bound stated by the theory.
    Theory,
    /// An independent numerical oracle or an empirical band.
    Oracle,
    /// Holds by construction.
    Trivial,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Theory => "theory",
            Tag::Oracle => "oracle",
            Tag::Trivial => "trivial",
        }
    }
}

/// How `measured` is compared with `target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Tolerance {
    /// `|m - t| <= tol |t|`.
    Rel(f64),
    /// `|m - t| <= tol`.
    Abs(f64),
    /// `m <= t`.
    AtMost,
    /// `m >= t`.
    AtLeast,
    /// `m > t`.
    Above,
}

impl Tolerance {
    pub fn check(self, m: f64, t: f64) -> bool {
        if m.is_nan() || t.is_nan() {
            return false;
        }
        match self {
            Tolerance::Rel(tol) => (m - t).abs() <= tol * t.abs(),
            Tolerance::Abs(tol) => (m - t).abs() <= tol,
            Tolerance::AtMost => m <= t,
            Tolerance::AtLeast => m >= t,
            Tolerance::Above => m > t,
        }
    }

    pub fn render(self) -> String {
        match self {
            Tolerance::Rel(t) => format!("rel:{}", fmt_f(t)),
            Tolerance::Abs(t) => format!("abs:{}", fmt_f(t)),
            Tolerance::AtMost => "max".into(),
            Tolerance::AtLeast => "min".into(),
            Tolerance::Above => "gt".into(),
        }
    }
}

/// Fixed float format used in every emitted file.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.12e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub experiment: String,
    pub check: String,
    pub quantity: String,
    pub parameters: String,
    pub measured: f64,
    pub target: f64,
    pub tag: Tag,
    pub reference: String,
    pub tolerance: Tolerance,
    pub pass: bool,
}

impl Row {
    pub fn fields(&self) -> [String; 10] {
        [
            self.experiment.clone(),
            self.check.clone(),
            self.quantity.clone(),
            self.parameters.clone(),
            fmt_f(self.measured),
            fmt_f(self.target),
            self.tag.as_str().into(),
            self.reference.clone(),
            self.tolerance.render(),
            self.pass.to_string(),
        ]
    }
}

/// Column-oriented data for external plotting.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: &str, values: &[f64]) {
        assert_eq!(values.len() + 1, self.header.len(), "table {} row width", self.name);
        let mut row = vec![label.to_string()];
        row.extend(values.iter().map(|v| fmt_f(*v)));
        self.rows.push(row);
    }
}

/// Collects rows and tables for one experiment.
#[derive(Debug, Default)]
pub struct Report {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub tables: Vec<Table>,
    pub warnings: Vec<String>,
    /// Context for the rows pushed next.
    check: String,
    reference: String,
}

impl Report {
    pub fn new(experiment: &str) -> Self {
        Report {
            experiment: experiment.into(),
            ..Default::default()
        }
    }

    /// Rows pushed after this call belong to `check` and cite `reference`.
    pub fn section(&mut self, check: &str, reference: &str) {
        self.check = check.into();
        self.reference = reference.into();
    }

    pub fn push(&mut self, quantity: impl Into<String>, parameters: impl Into<String>, measured: f64, target: f64, tag: Tag, tol: Tolerance) {
        self.rows.push(Row {
            experiment: self.experiment.clone(),
            check: self.check.clone(),
            quantity: quantity.into(),
            parameters: parameters.into(),
            measured,
            target,
            tag,
            reference: self.reference.clone(),
            tolerance: tol,
            pass: tol.check(measured, target),
        });
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

pub fn write_results(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(dir: &Path, t: &Table) -> Result<()> {
    let path = dir.join(format!("{}.csv", t.name));
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CheckSummary {
    pub rows: usize,
    pub passed: usize,
}

#[derive(Debug, Serialize)]
pub struct Environment {
    pub lab_version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub experiment: &'a str,
    pub pass: bool,
    pub rows: usize,
    pub passed: usize,
    pub checks: BTreeMap<String, CheckSummary>,
    pub warnings: &'a [String],
    pub tables: Vec<String>,
    pub environment: Environment,
    pub elapsed_seconds: f64,
    pub config: serde_json::Value,
}

pub fn summarize<'a>(report: &'a Report, config: serde_json::Value, elapsed_seconds: f64) -> Summary<'a> {
    let mut checks: BTreeMap<String, CheckSummary> = BTreeMap::new();
    for r in &report.rows {
        let e = checks.entry(r.check.clone()).or_insert(CheckSummary { rows: 0, passed: 0 });
        e.rows += 1;
        e.passed += r.pass as usize;
    }
    Summary {
        experiment: &report.experiment,
        pass: report.all_pass(),
        rows: report.rows.len(),
        passed: report.rows.iter().filter(|r| r.pass).count(),
        checks,
        warnings: &report.warnings,
        tables: report.tables.iter().map(|t| format!("{}.csv", t.name)).collect(),
        environment: Environment {
            lab_version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: rayon::current_num_threads(),
        },
        elapsed_seconds,
        config,
    }
}

/// Writes results.csv, summary.json and the data tables into `dir`.
pub fn write_all(dir: &Path, report: &Report, config: serde_json::Value, elapsed_seconds: f64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_results(&dir.join("results.csv"), &report.rows)?;
    for t in &report.tables {
        write_table(dir, t)?;
    }
    let summary = summarize(report, config, elapsed_seconds);
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}
