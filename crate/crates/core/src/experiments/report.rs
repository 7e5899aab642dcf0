//! CSV and JSON output of a sweep. The CSV carries no timings so that equal
//! inputs give byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checks::CheckReport;
use super::fit::FitResult;
use super::sweep::{SweepReport, SweepRow, Verdict, SCHEMA_VERSION};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 21] = [
    "schema_version",
    "eps",
    "nx",
    "ny",
    "h_min",
    "max_gradient",
    "centreline_gradient",
    "pressure_oscillation",
    "max_stress",
    "coefficient_gap_1",
    "coefficient_gap_2",
    "coefficient_gap_3",
    "a11_11",
    "a11_22",
    "a11_33",
    "a11_positive_definite",
    "conditioning",
    "ns_gradient_difference",
    "picard_iterations",
    "grid_change",
    "grid_converged",
];

/// Seventeen significant digits.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn csv_record(r: &SweepRow) -> Vec<String> {
    vec![
        SCHEMA_VERSION.to_string(),
        real(r.eps),
        r.nx.to_string(),
        r.ny.to_string(),
        real(r.h_min),
        real(r.max_gradient),
        real(r.centreline_gradient),
        real(r.pressure_oscillation),
        real(r.max_stress),
        real(r.coefficient_gaps[0]),
        real(r.coefficient_gaps[1]),
        real(r.coefficient_gaps[2]),
        real(r.a11_diagonal[0]),
        real(r.a11_diagonal[1]),
        real(r.a11_diagonal[2]),
        r.a11_positive_definite.to_string(),
        real(r.stokes_system.conditioning),
        opt_real(r.ns_gradient_difference),
        r.picard_iterations
            .map(|n| n.to_string())
            .unwrap_or_default(),
        opt_real(r.grid_change),
        r.grid_converged.map(|b| b.to_string()).unwrap_or_default(),
    ]
}

pub fn write_sweep_csv(report: &SweepReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for r in &report.rows {
        w.write_record(csv_record(r)).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of `checks.json`: criterion verdicts, fits, and optionally the
/// invariant suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecksFile {
    pub schema_version: u32,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
    pub fits: std::collections::BTreeMap<String, FitResult>,
    pub skipped: Vec<String>,
    pub unconverged_rows: Vec<f64>,
    pub invariants: Option<CheckReport>,
}

impl ChecksFile {
    pub fn from_report(report: &SweepReport, invariants: Option<CheckReport>) -> Self {
        let inv_ok = invariants.as_ref().is_none_or(|c| c.passed());
        Self {
            schema_version: SCHEMA_VERSION,
            passed: report.all_passed() && inv_ok,
            verdicts: report.verdicts.clone(),
            fits: report.fits.clone(),
            skipped: report.skipped.clone(),
            unconverged_rows: report.unconverged_rows(),
            invariants,
        }
    }
}

/// Writes `sweep.csv`, `sweep.json` and `checks.json` into `dir`.
pub fn write_outputs(
    report: &SweepReport,
    invariants: Option<CheckReport>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv = std::fs::File::create(dir.join("sweep.csv"))?;
    write_sweep_csv(report, std::io::BufWriter::new(csv))?;
    std::fs::write(
        dir.join("sweep.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    let checks = ChecksFile::from_report(report, invariants);
    std::fs::write(
        dir.join("checks.json"),
        serde_json::to_string_pretty(&checks)?,
    )?;
    Ok(())
}

/// Reads a `sweep.json` and re-derives fits and verdicts from its rows.
pub fn load_report(path: &Path) -> Result<SweepReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let stored: SweepReport = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    if stored.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "report schema {} differs from {SCHEMA_VERSION}",
            stored.schema_version
        )));
    }
    Ok(SweepReport::assemble(
        stored.config,
        stored.rows,
        stored.failures,
    ))
}
