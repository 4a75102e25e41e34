//! CSV and JSON reports.

use std::path::Path;

use failaware_core::eval::MetricsReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub policy: String,
    pub task: String,
    pub config_hash: String,
    pub seed: u64,
    pub episodes: usize,
    pub tsr: f64,
    pub tsr_ci_lo: f64,
    pub tsr_ci_hi: f64,
    pub tns: Option<f64>,
    pub pc_recip: Option<f64>,
    pub axis: String,
    pub axis_value: Option<f64>,
}

impl CsvRow {
    pub fn new(policy: &str, task: &str, config_hash: &str, seed: u64, m: &MetricsReport) -> Self {
        Self {
            policy: policy.into(),
            task: task.into(),
            config_hash: config_hash.into(),
            seed,
            episodes: m.episodes,
            tsr: m.tsr,
            tsr_ci_lo: m.tsr_ci.0,
            tsr_ci_hi: m.tsr_ci.1,
            tns: m.tns,
            pc_recip: m.pc_recip,
            axis: String::new(),
            axis_value: None,
        }
    }

    pub fn with_axis(mut self, axis: &str, value: f64) -> Self {
        self.axis = axis.into();
        self.axis_value = Some(value);
        self
    }
}

/// First 16 hex digits of the SHA-256 of a value's JSON encoding.
pub fn config_hash(value: &serde_json::Value) -> String {
    let text = serde_json::to_string(value).expect("json serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn csv_bytes(rows: &[CsvRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> CliResult<()> {
    crate::io::write_file(path, &csv_bytes(rows)?)
}

pub fn read_csv(path: &Path) -> CliResult<Vec<CsvRow>> {
    let bytes = crate::io::read_dependency(path, "report")?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    r.deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(|e| CliError::Dependency(format!("{}: {e}", path.display())))
}

/// JSON mirror of a report with the full configuration echo.
pub fn json_report(config: &serde_json::Value, rows: &[CsvRow], extra: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "config": config,
        "rows": rows,
        "details": extra,
    })
}
