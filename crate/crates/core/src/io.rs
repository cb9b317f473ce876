//! CSV and JSON output for trajectories and reports.

use crate::error::Result;
use crate::limit::ChargeTrajectory;
use serde::Serialize;
use std::path::Path;

/// Columns t, re_q, im_q, abs_q.
pub fn write_trajectory_csv(path: &Path, traj: &ChargeTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "re_q", "im_q", "abs_q"])?;
    for (j, q) in traj.values.iter().enumerate() {
        w.write_record(&[traj.grid.node(j), q.re, q.im, q.norm()].map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header row then one row per entry of `rows`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
