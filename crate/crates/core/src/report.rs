//! Report emission: `report.json`, `summary.txt` and the CSV side tables.
//!
//! Schema (version 1) of `report.json`:
//! `{schema_version, metadata, stages: [{stage, info, reports, scans, tables}], totals}`
//! where each report is an [`InequalityReport`] and each table entry names a
//! CSV file written next to the report.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::bounds::InequalityReport;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::suite::{metadata, StageResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Pass/fail counts over every report, scan checks included.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Totals {
    pub checks: usize,
    pub failed: usize,
    pub scans: usize,
}

pub fn totals(results: &[StageResult]) -> Totals {
    let mut t = Totals::default();
    for s in results {
        for r in s.all_reports() {
            t.checks += 1;
            if !r.pass {
                t.failed += 1;
            }
        }
        t.scans += s.scans.len();
    }
    t
}

pub fn report_json(config: &RunConfig, results: &[StageResult]) -> Value {
    let t = totals(results);
    json!({
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata(config),
        "stages": results,
        "totals": {"checks": t.checks, "failed": t.failed, "scans": t.scans},
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.6e}")
}

fn summary_line(stage: &str, r: &InequalityReport) -> String {
    format!("{:<4}  {:<13} {:<56} {:>14} {:>14} {:>14}\n", if r.pass { "PASS" } else { "FAIL" }, stage, r.name, fmt(r.lhs), fmt(r.rhs), fmt(r.margin))
}

/// Human-readable table, one line per check.
pub fn summary_text(results: &[StageResult]) -> String {
    let t = totals(results);
    let mut s = format!("{:<4}  {:<13} {:<56} {:>14} {:>14} {:>14}\n", "", "stage", "check", "lhs", "rhs", "margin");
    for st in results {
        for r in st.all_reports() {
            s.push_str(&summary_line(st.stage.name(), r));
        }
    }
    s.push_str(&format!("\n{} checks, {} failed, {} scans\n", t.checks, t.failed, t.scans));
    s
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
}

/// Writes `report.json`, `summary.txt` and every side table into `dir`.
pub fn emit_report(dir: &Path, config: &RunConfig, results: &[StageResult]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::InvalidParameter(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let json = serde_json::to_string_pretty(&report_json(config, results)).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p = dir.join("report.json");
    write(&p, &(json + "\n"))?;
    written.push(p);
    let p = dir.join("summary.txt");
    write(&p, &summary_text(results))?;
    written.push(p);
    for st in results {
        for t in &st.tables {
            let p = dir.join(&t.file);
            write(&p, &t.csv)?;
            written.push(p);
        }
    }
    Ok(written)
}
