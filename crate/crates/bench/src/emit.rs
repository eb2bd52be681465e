//! Report output as JSON or as a directory of CSV files.

use crate::bench::BenchReport;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub const SUMMARY_HEADER: [&str; 8] = [
    "h",
    "Cost",
    "Iter",
    "Time",
    "dT",
    "build_ms",
    "solve_ms",
    "termination",
];

/// Writes the report. JSON goes to the file `path`; CSV writes
/// `summary.csv`, `trace_h{h}.csv` and, with trajectories, `traj_h{h}.csv`
/// into the directory `path`.
pub fn emit(
    report: &BenchReport,
    format: Format,
    path: &Path,
    trajectories: bool,
) -> Result<(), EmitError> {
    let mut report = report.clone();
    if !trajectories {
        for t in &mut report.traces {
            t.trajectories = None;
        }
    }
    match format {
        Format::Json => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, serde_json::to_string_pretty(&report)?)?;
        }
        Format::Csv => write_csv(&report, path)?,
    }
    Ok(())
}

fn write_csv(report: &BenchReport, dir: &Path) -> Result<(), EmitError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.h.to_string(),
            r.final_cost.to_string(),
            r.iterations.to_string(),
            r.total_time_ms.to_string(),
            r.per_iter_time_ms.to_string(),
            r.build_time_ms.to_string(),
            r.solve_time_ms.to_string(),
            r.termination.clone(),
        ])?;
    }
    w.flush()?;
    for t in &report.traces {
        let mut w = csv::Writer::from_path(dir.join(format!("trace_h{}.csv", t.h)))?;
        w.write_record(["iter", "cost", "feas_err"])?;
        for (k, (c, f)) in t.cost.iter().zip(&t.feas_err).enumerate() {
            w.write_record([k.to_string(), c.to_string(), f.to_string()])?;
        }
        w.flush()?;
        if let Some(trajs) = &t.trajectories {
            let mut w = csv::Writer::from_path(dir.join(format!("traj_h{}.csv", t.h)))?;
            w.write_record(["iter", "waypoint", "x", "y"])?;
            for (k, pts) in trajs.iter().enumerate() {
                for (q, p) in pts.iter().enumerate() {
                    w.write_record([
                        k.to_string(),
                        (q + 1).to_string(),
                        p[0].to_string(),
                        p[1].to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Reads a report written with [`Format::Json`].
pub fn load_report(path: &Path) -> Result<BenchReport, EmitError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
