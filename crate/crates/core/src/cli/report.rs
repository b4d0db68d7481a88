//! Checks, tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One pass/fail comparison of a measured value against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        // NaN never passes
        Check { name: name.into(), passed: value <= tolerance, value, comparison: Comparison::AtMost, tolerance, detail: None }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value >= tolerance, value, comparison: Comparison::AtLeast, tolerance, detail: None }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn line(&self) -> String {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("{status} {}: {:.6e} {op} {:.3e}", self.name, self.value, self.tolerance);
        if let Some(d) = &self.detail {
            s.push_str(&format!(" ({d})"));
        }
        s
    }
}

/// A CSV file: header row plus records.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&str]) -> Self {
        Table { file: file.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = T>, T: ToString>(&mut self, row: I) {
        self.rows.push(row.into_iter().map(|v| v.to_string()).collect());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(&self.file);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// `(file name, svg document)`.
    pub plots: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(&mut self, other: Outcome) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
        self.plots.extend(other.plots);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub versions: Versions,
    pub started: String,
    pub wall_clock_seconds: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub oue_core: String,
    pub manifest_format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Versions { oue_core: env!("CARGO_PKG_VERSION").to_string(), manifest_format: 1 }
    }
}

/// Creates `<output_dir>/<command>-<timestamp>-s<seed>`, failing with an
/// invalid-argument error naming the path when it cannot be written.
pub fn create_run_dir(cfg: &RunConfig, stamp: &str) -> Result<PathBuf> {
    let unwritable = |e: std::io::Error| Error::invalid(format!("output_dir {} is not writable: {e}", cfg.output_dir.display()));
    fs::create_dir_all(&cfg.output_dir).map_err(unwritable)?;
    let base = format!("{}-{stamp}-s{}", cfg.command.name(), cfg.seed);
    let mut dir = cfg.output_dir.join(&base);
    let mut n = 1;
    while dir.exists() {
        dir = cfg.output_dir.join(format!("{base}-{n}"));
        n += 1;
    }
    fs::create_dir(&dir).map_err(unwritable)?;
    Ok(dir)
}

/// Writes tables, plots and `manifest.json`; returns the manifest.
pub fn persist(cfg: &RunConfig, outcome: &Outcome, dir: &Path, started: String, seconds: f64) -> Result<RunManifest> {
    let mut artifacts = Vec::new();
    for t in &outcome.tables {
        t.write(dir)?;
        artifacts.push(t.file.clone());
    }
    for (name, svg) in &outcome.plots {
        fs::write(dir.join(name), svg)?;
        artifacts.push(name.clone());
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        versions: Versions::current(),
        started,
        wall_clock_seconds: seconds,
        passed: outcome.passed(),
        checks: outcome.checks.clone(),
        artifacts,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_fails_both_ways() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("x", f64::NAN, 1.0).passed);
        assert!(Check::at_most("x", 1.0, 1.0).passed);
        assert!(Check::at_most("x", 0.5, 1.0).line().starts_with("PASS x"));
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("a.csv", &["k", "v"]);
        t.push([1.0, 0.1 + 0.2]);
        let p = t.write(dir.path()).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "k,v\n1,0.30000000000000004\n");
    }
}
