//! Report types and their table, JSON and CSV renderings.
//!
//! Every floating-point value written out is rounded to 12 significant
//! digits first, so the text is stable across platforms.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use spingate_core::calibration::{DephasingEstimate, PhotonFlux, SaturationFit};
use spingate_core::{BootstrapEstimate, FidelityBudget};

use crate::config::ConfigFile;
use crate::error::CliError;

pub const SIG_DIGITS: usize = 12;

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r != 0.0 && (r.abs() < 1e-6 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded.
pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut v = serde_json::to_value(report).expect("report serializes");
    round_value(&mut v);
    serde_json::to_string_pretty(&v).expect("value serializes")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; the only field that varies between runs.
    pub generated_at: u64,
}

impl Provenance {
    pub fn new(config_text: Option<&str>, data: Option<&[u8]>, seed: Option<u64>) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: config_text.map(|t| sha256_hex(t.as_bytes())),
            data_sha256: data.map(sha256_hex),
            seed,
            generated_at: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// One multiplicative channel factor reported by the gate simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFactor {
    pub channel: String,
    pub multiplier: f64,
}

/// Output of `budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub inputs: ConfigFile,
    pub channel_multipliers: Vec<ChannelFactor>,
    pub budget: FidelityBudget,
    pub conditional_fidelity: f64,
    pub overall_fidelity: f64,
    pub success_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrence: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub fidelity_exact: f64,
    pub fidelity_product: f64,
    pub conditional_fidelity: f64,
    pub success_prob: f64,
    pub visibility: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 7] = [
        "index",
        "value",
        "fidelity_exact",
        "fidelity_product",
        "conditional_fidelity",
        "success_prob",
        "visibility",
    ];

    pub fn cells(&self) -> Vec<String> {
        vec![
            self.index.to_string(),
            fmt_num(self.value),
            fmt_num(self.fidelity_exact),
            fmt_num(self.fidelity_product),
            fmt_num(self.conditional_fidelity),
            fmt_num(self.success_prob),
            fmt_num(self.visibility),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub inputs: ConfigFile,
    pub param: String,
    pub rows: Vec<SweepRow>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub inputs: ConfigFile,
    pub visibility_exact: f64,
    pub visibility_linear: f64,
    pub gamma_d_from_linear: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<DephasingEstimate>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub fit: SaturationFit,
    pub points_used: usize,
    pub background_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_nw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_flux: Option<PhotonFlux>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceReport {
    pub m_x: f64,
    pub m_y: f64,
    pub z_total: u64,
    pub bootstrap: BootstrapEstimate,
    pub provenance: Provenance,
}

/// A rendered report: JSON body, human-readable rows and CSV rows.
pub struct Rendered {
    pub json: String,
    pub table: Vec<(String, String)>,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
}

impl Rendered {
    /// Key/value CSV built from the table rows.
    pub fn key_value<T: Serialize>(report: &T, table: Vec<(String, String)>) -> Self {
        let csv_rows = table.iter().map(|(k, v)| vec![k.clone(), v.clone()]).collect();
        Self {
            json: to_json(report),
            table,
            csv_header: vec!["quantity".into(), "value".into()],
            csv_rows,
        }
    }

    pub fn emit(&self, json: bool, csv_path: Option<&Path>) -> Result<(), CliError> {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        if json {
            writeln!(out, "{}", self.json)?;
        } else {
            let width = self.table.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in &self.table {
                writeln!(out, "{k:<width$}  {v}")?;
            }
        }
        if let Some(path) = csv_path {
            let mut w = csv::Writer::from_path(path)
                .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
            let io = |e: csv::Error| CliError::Io(std::io::Error::other(e.to_string()));
            w.write_record(&self.csv_header).map_err(io)?;
            for row in &self.csv_rows {
                w.write_record(row).map_err(io)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
