//! CSV time series and JSON reports.

use std::io::Write;
use std::path::Path;

use euler_align::bounds::{BoundReport, CheckSummary};
use euler_align::{DiagnosticsRecord, KernelSpec, SolverConfig};
use serde::Serialize;

use crate::error::CliError;
use crate::experiment::{InitialMeasures, Outcome};

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 11] = [
    "t",
    "mass",
    "momentum",
    "entropy",
    "l1_dev",
    "l2_dev_sq",
    "sup_rho",
    "sup_q",
    "e_integral",
    "dissipation",
    "entropy_residual",
];

/// Marker written in the `t` column when a run aborts.
pub const ABORTED_MARKER: &str = "aborted";

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn record_row(r: &DiagnosticsRecord) -> [String; 11] {
    [
        fmt_f64(r.time),
        fmt_f64(r.mass),
        fmt_f64(r.momentum),
        fmt_f64(r.entropy),
        fmt_f64(r.l1_dev),
        fmt_f64(r.l2_dev_sq),
        fmt_f64(r.sup_rho),
        fmt_f64(r.sup_q),
        fmt_f64(r.e_integral),
        fmt_f64(r.dissipation),
        r.entropy_residual.map(fmt_f64).unwrap_or_default(),
    ]
}

/// Writes the diagnostics time series; an aborted run ends with a marker row.
pub fn write_csv<W: Write>(out: W, records: &[DiagnosticsRecord], aborted: bool) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(record_row(r))?;
    }
    if aborted {
        let mut row = vec![String::new(); CSV_HEADER.len()];
        row[0] = ABORTED_MARKER.to_string();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunSection {
    pub completed: bool,
    pub steps: usize,
    pub records: usize,
    pub final_time: f64,
    pub error: Option<String>,
    pub max_mass_drift: f64,
    pub max_abs_e_integral: f64,
    pub e_scale: f64,
    pub sup_q_drift: Option<f64>,
    pub entropy_residual_tail_max: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub schema_version: u32,
    pub name: &'a str,
    pub seed: u64,
    pub n_cells: usize,
    pub kernel: &'a KernelSpec,
    pub solver: &'a SolverConfig,
    pub initial: &'a InitialMeasures,
    pub bounds: &'a BoundReport,
    pub checks: Option<&'a CheckSummary>,
    pub check_error: Option<&'a str>,
    pub run: RunSection,
}

impl<'a> RunReport<'a> {
    pub fn new(outcome: &'a Outcome) -> Self {
        let p = &outcome.prepared;
        let traj = &outcome.trajectory;
        Self {
            schema_version: SCHEMA_VERSION,
            name: &p.config.name,
            seed: p.config.seed,
            n_cells: p.config.grid.n_cells,
            kernel: &p.config.kernel,
            solver: &p.config.solver,
            initial: &p.initial,
            bounds: &p.report,
            checks: outcome.checks.as_ref(),
            check_error: outcome.check_error.as_deref(),
            run: RunSection {
                completed: traj.is_complete(),
                steps: traj.steps,
                records: traj.records.len(),
                final_time: traj.final_state.time,
                error: traj.error.as_ref().map(|e| e.to_string()),
                max_mass_drift: outcome.max_mass_drift(),
                max_abs_e_integral: outcome.max_e_integral(),
                e_scale: p.initial.e_scale(),
                sup_q_drift: (p.initial.sup_q0 > 0.0 && !p.initial.e0_zero).then(|| outcome.sup_q_drift()),
                entropy_residual_tail_max: outcome.tail_max(|r| r.entropy_residual),
            },
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes the CSV and JSON artifacts of an outcome into `out_dir`.
pub fn write_outcome(outcome: &Outcome, out_dir: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf), CliError> {
    std::fs::create_dir_all(out_dir)?;
    let config = &outcome.prepared.config;
    let csv_name = config
        .outputs
        .csv
        .clone()
        .unwrap_or_else(|| format!("{}.csv", config.name));
    let report_name = config
        .outputs
        .report
        .clone()
        .unwrap_or_else(|| format!("{}.json", config.name));
    let csv_path = out_dir.join(csv_name);
    let report_path = out_dir.join(report_name);
    let file = std::fs::File::create(&csv_path)?;
    write_csv(
        std::io::BufWriter::new(file),
        &outcome.trajectory.records,
        outcome.trajectory.error.is_some(),
    )?;
    write_json(&report_path, &RunReport::new(outcome))?;
    Ok((csv_path, report_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use euler_align::{FlockState, TorusGrid};

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn csv_layout() {
        let g = TorusGrid::new(16).unwrap();
        let s = FlockState::new(g.constant(1.0), g.constant(0.0), 0.0).unwrap();
        let rec = DiagnosticsRecord::compute(&s, &KernelSpec::plateau(1.0, 1.0)).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[rec], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.split("\r\n").collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines[1].split(',').count(), 11);
        assert!(lines[1].ends_with(','));
        assert_eq!(lines[2], "aborted,,,,,,,,,,");
    }
}
