use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

/// One pass/fail comparison made in `--check` mode.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|value - target| ≤ tolerance`.
    pub fn near(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    /// `value ≥ target - tolerance`.
    pub fn at_least(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: value >= target - tolerance,
        }
    }

    /// `value ≤ target + tolerance`.
    pub fn at_most(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: value <= target + tolerance,
        }
    }
}

#[derive(Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }
}

pub struct Report {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub result: Value,
    pub table: Table,
    pub checks: Vec<Check>,
}

impl Report {
    fn header(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
        })
    }

    pub fn write_json<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let doc = json!({
            "header": self.header(),
            "result": self.result,
            "checks": self.checks,
        });
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        writeln!(w)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "# {}", self.header())?;
        for c in &self.checks {
            writeln!(w, "# check {} {}", c.name, if c.pass { "pass" } else { "fail" })?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.table.columns)?;
        for row in &self.table.rows {
            out.write_record(row)?;
        }
        out.flush()
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
