use std::fs;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Rows for CSV output; the first row is the header.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    fn write(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// A command result that renders as JSON or as a CSV table.
pub trait Render: Serialize {
    fn table(&self) -> Table;
}

/// 17 significant digits, enough to round-trip any double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn emit<R: Render>(report: &R, format: Format, path: Option<&Path>) -> io::Result<()> {
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, report)?;
            buf.push(b'\n');
        }
        Format::Csv => report.table().write(&mut buf)?,
    }
    match path {
        Some(p) => fs::write(p, buf),
        None => io::stdout().lock().write_all(&buf),
    }
}

/// One verification outcome. `passed` is `|observed - expected| ≤ tolerance`
/// unless the check states otherwise in its name.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub seed: u64,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn close(
        suite: &'static str,
        name: String,
        seed: u64,
        observed: f64,
        expected: f64,
        tolerance: f64,
    ) -> Self {
        Check {
            suite,
            name,
            seed,
            observed,
            expected,
            tolerance,
            passed: (observed - expected).abs() <= tolerance,
        }
    }

    /// `observed ≥ expected - tolerance`
    pub fn at_least(
        suite: &'static str,
        name: String,
        seed: u64,
        observed: f64,
        expected: f64,
        tolerance: f64,
    ) -> Self {
        Check {
            suite,
            name,
            seed,
            observed,
            expected,
            tolerance,
            passed: observed >= expected - tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl Render for VerifyReport {
    fn table(&self) -> Table {
        let mut t = Table::new(vec![
            "suite",
            "name",
            "seed",
            "observed",
            "expected",
            "tolerance",
            "passed",
        ]);
        for c in &self.checks {
            t.rows.push(vec![
                c.suite.to_string(),
                c.name.clone(),
                c.seed.to_string(),
                num(c.observed),
                num(c.expected),
                num(c.tolerance),
                c.passed.to_string(),
            ]);
        }
        t
    }
}
