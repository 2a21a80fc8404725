//! Verification reports and their CSV/JSON/plot-series files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ReportFormat;

/// One measured quantity inside a check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Item {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub check_id: String,
    pub paper_anchor: String,
    pub value: f64,
    pub target: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub runtime_s: f64,
    pub items: Vec<Item>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    pub fn new(check_id: &str, paper_anchor: &str) -> Self {
        Self {
            check_id: check_id.into(),
            paper_anchor: paper_anchor.into(),
            value: f64::NAN,
            target: f64::NAN,
            pass: false,
            tolerance: 0.0,
            runtime_s: 0.0,
            items: Vec::new(),
            error: None,
        }
    }

    /// Adds an item; returns its pass flag.
    pub fn item(&mut self, name: impl Into<String>, value: f64, target: f64, pass: bool) -> bool {
        self.items.push(Item {
            name: name.into(),
            value,
            target,
            pass,
        });
        pass
    }

    /// Item passing when `value <= target`.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, target: f64) -> bool {
        self.item(name, value, target, value <= target)
    }

    /// Sets the headline and the pass flag from all items.
    pub fn finish(mut self, value: f64, target: f64, tolerance: f64) -> Self {
        self.value = value;
        self.target = target;
        self.tolerance = tolerance;
        self.pass = !self.items.is_empty() && self.items.iter().all(|i| i.pass);
        self
    }

    pub fn failed(check_id: &str, paper_anchor: &str, err: &anyhow::Error) -> Self {
        let mut c = Self::new(check_id, paper_anchor);
        c.error = Some(format!("{err:#}"));
        c
    }
}

/// Two-column plot data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub abscissa: String,
    pub ordinate: String,
    pub rows: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, abscissa: &str, ordinate: &str, rows: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            abscissa: abscissa.into(),
            ordinate: ordinate.into(),
            rows,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub kind: String,
    pub seed: u64,
    pub summary: Summary,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub series: Vec<Series>,
}

impl VerificationReport {
    pub fn new(kind: &str, seed: u64) -> Self {
        Self {
            kind: kind.into(),
            seed,
            summary: Summary::default(),
            checks: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.summary = Summary {
            total: self.checks.len(),
            passed: self.checks.iter().filter(|c| c.pass).count(),
            failed: self.checks.iter().filter(|c| !c.pass).count(),
        };
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.check_id == id)
    }
}

pub const CSV_HEADER: [&str; 7] = ["check_id", "paper_anchor", "value", "target", "pass", "tolerance", "runtime_s"];

/// Shortest round-trip scientific notation.
fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn to_csv(report: &VerificationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for c in &report.checks {
        w.write_record([
            c.check_id.clone(),
            c.paper_anchor.clone(),
            num(c.value),
            num(c.target),
            c.pass.to_string(),
            num(c.tolerance),
            num(c.runtime_s),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn to_json(report: &VerificationReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn series_csv(series: &Series) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([&series.abscissa, &series.ordinate])?;
    for (x, y) in &series.rows {
        w.write_record([num(*x), num(*y)])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes `report.csv` or `report.json` and one `series/<name>.csv` per
/// series; returns the report path.
pub fn emit_report(report: &VerificationReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (name, body) = match format {
        ReportFormat::Csv => ("report.csv", to_csv(report)?),
        ReportFormat::Json => ("report.json", to_json(report)?),
    };
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    if !report.series.is_empty() {
        let sdir = dir.join("series");
        fs::create_dir_all(&sdir).with_context(|| format!("creating {}", sdir.display()))?;
        for s in &report.series {
            let p = sdir.join(format!("{}.csv", s.name));
            fs::write(&p, series_csv(s)?).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let report = VerificationReport::new("all", 1);
        assert_eq!(to_csv(&report).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn single_check_is_one_row_in_declared_order() {
        let mut report = VerificationReport::new("kernels", 1);
        let mut c = Check::new("C07_h_gaussian", "h-kernel Gaussian identity");
        c.at_most("ratio_deviation_m3", 2.5e-9, 1e-6);
        report.push(c.finish(2.5e-9, 1e-6, 1e-6));
        let csv = to_csv(&report).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "C07_h_gaussian,h-kernel Gaussian identity,2.5e-9,1e-6,true,1e-6,0e0");
        let json: serde_json::Value = serde_json::from_str(&to_json(&report).unwrap()).unwrap();
        assert_eq!(json["summary"]["passed"], 1);
        assert_eq!(json["checks"][0]["items"][0]["name"], "ratio_deviation_m3");
    }

    #[test]
    fn series_files_have_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = VerificationReport::new("holder", 1);
        let offsets = [0.5, 0.25, 0.125, 0.0625];
        report.series.push(Series::new(
            "holder_spatial",
            "displacement",
            "lp_difference",
            offsets.iter().map(|&h| (h, h * h)).collect(),
        ));
        emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("series/holder_spatial.csv")).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), offsets.len());
        assert_eq!(rows[1], "2.5e-1,6.25e-2");
    }
}
