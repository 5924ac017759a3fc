//! Experiment reports: per-replica CSV records plus a JSON summary whose
//! statistics are recomputable from the records.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// One acceptance-style check inside an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: String,
    /// Measured statistic.
    pub value: f64,
    /// Human-readable target, e.g. "<= 0.02" or "in [0.52, 0.68]".
    pub target: String,
    pub passed: bool,
}

impl CriterionResult {
    pub fn le(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            target: format!("<= {bound}"),
            passed: value <= bound,
        }
    }

    pub fn ge(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            target: format!(">= {bound}"),
            passed: value >= bound,
        }
    }

    pub fn in_range(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            target: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&value),
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            value: if ok { 1.0 } else { 0.0 },
            target: "true".to_string(),
            passed: ok,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "  [{}] {}: value {:.6} target {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
    /// Sorted scalar summary statistics.
    pub summary: BTreeMap<String, f64>,
    /// Full per-replica records (CSV text with a fixed header).
    #[serde(skip)]
    pub records_csv: String,
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            criteria: Vec::new(),
            summary: BTreeMap::new(),
            records_csv: String::new(),
        }
    }

    pub fn push(&mut self, c: CriterionResult) {
        self.passed &= c.passed;
        self.criteria.push(c);
    }

    pub fn stat(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    /// Deterministic JSON (sorted keys throughout).
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            experiment: &'a str,
            passed: bool,
            criteria: &'a [CriterionResult],
            summary: &'a BTreeMap<String, f64>,
        }
        serde_json::to_string_pretty(&Doc {
            experiment: &self.name,
            passed: self.passed,
            criteria: &self.criteria,
            summary: &self.summary,
        })
        .expect("report serialization cannot fail")
    }

    /// Write `<name>.records.csv` and `<name>.summary.json` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
        std::fs::write(
            dir.join(format!("{}.records.csv", self.name)),
            &self.records_csv,
        )?;
        std::fs::write(
            dir.join(format!("{}.summary.json", self.name)),
            self.summary_json(),
        )?;
        Ok(())
    }

    pub fn print_lines(&self) {
        println!(
            "experiment {}: {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" }
        );
        for c in &self.criteria {
            println!("{}", c.line());
        }
    }
}
