//! CSV readers for measured data, with row-numbered diagnostics.

use std::path::Path;

use serde::Deserialize;
use spingate_core::calibration::{SaturationPoint, VisibilityPoint};
use spingate_core::CoincidenceCounts;

use crate::error::CliError;

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads every record, reporting the 1-based data row (header is row 1).
fn records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>, CliError> {
    let mut reader = open(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<T>().enumerate() {
        let row = i + 2;
        let value = rec.map_err(|e| CliError::Data(format!("{} row {row}: {e}", path.display())))?;
        out.push((row, value));
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct CountRow {
    outcome: String,
    counts: u64,
}

pub fn read_counts(path: &Path) -> Result<CoincidenceCounts, CliError> {
    let mut counts = CoincidenceCounts::default();
    for (row, r) in records::<CountRow>(path)? {
        counts
            .set(&r.outcome, r.counts)
            .map_err(|e| CliError::Data(format!("{} row {row}: {e}", path.display())))?;
    }
    Ok(counts)
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SpinState {
    Up,
    Down,
}

#[derive(Debug, Deserialize)]
struct SaturationRow {
    power_nw: f64,
    counts: f64,
    #[serde(default)]
    spin_state: Option<SpinState>,
}

/// Saturation points prepared in spin ↑; rows marked `down` are background
/// and are returned separately.
pub fn read_saturation(path: &Path) -> Result<(Vec<SaturationPoint>, Vec<SaturationPoint>), CliError> {
    let mut up = Vec::new();
    let mut down = Vec::new();
    for (row, r) in records::<SaturationRow>(path)? {
        if !r.power_nw.is_finite() || r.power_nw < 0.0 || !r.counts.is_finite() {
            return Err(CliError::Data(format!(
                "{} row {row}: power_nw must be >= 0 and counts finite",
                path.display()
            )));
        }
        let p = SaturationPoint {
            power: r.power_nw,
            counts: r.counts,
        };
        match r.spin_state.unwrap_or(SpinState::Up) {
            SpinState::Up => up.push(p),
            SpinState::Down => down.push(p),
        }
    }
    Ok((up, down))
}

#[derive(Debug, Deserialize)]
struct VisibilityRow {
    n_bar: f64,
    visibility: f64,
    #[serde(default)]
    visibility_err: Option<f64>,
}

pub fn read_visibility(path: &Path) -> Result<Vec<VisibilityPoint>, CliError> {
    records::<VisibilityRow>(path)?
        .into_iter()
        .map(|(row, r)| {
            if !(r.n_bar.is_finite() && r.visibility.is_finite()) {
                return Err(CliError::Data(format!("{} row {row}: non-finite value", path.display())));
            }
            Ok(VisibilityPoint {
                n_bar: r.n_bar,
                visibility: r.visibility,
                error: r.visibility_err,
            })
        })
        .collect()
}
