//! Plot-ready CSV tables and the JSON manifest that accompanies them.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Stable CSV schemas: `(name, header)`. A change to any header bumps the
/// version suffix of its name.
pub mod schema {
    pub const CONSTANT: (&str, &[&str]) = ("constant/v1", &["x", "quantity", "value", "std_err", "S", "step", "flags"]);
    pub const EXPERIMENT: (&str, &[&str]) =
        ("experiment/v1", &["u", "x", "ratio_hat", "ci_lo", "ci_hi", "target", "target_se"]);
    pub const LEVELS: (&str, &[&str]) = (
        "levels/v1",
        &["u", "v_u", "n_conditioned", "n_replicates", "p_sup", "sup_distance", "low_confidence", "grid_step"],
    );
    pub const QUEUE_PREDICTION: (&str, &[&str]) = (
        "queue-prediction/v1",
        &["u", "prediction", "simulated", "simulated_se", "ratio", "ratio_se", "bhat", "bhat_se"],
    );
    pub const DOUBLE_SUM: (&str, &[&str]) = (
        "double-sum/v1",
        &["n", "blocks", "sigma", "sigma_sigma", "ratio", "ratio_se", "max_block_p", "control_ratio", "control_ratio_se", "control_bound"],
    );
    pub const ORACLE: (&str, &[&str]) = ("oracle/v1", &["x", "S", "value"]);
    pub const QUEUE_CLOSED_FORMS: (&str, &[&str]) =
        ("queue-closed-forms/v1", &["u", "tau_star", "m_u", "A", "B", "v_u", "q_u", "sqrt_2A_over_B"]);
    pub const CONVERGENCE: (&str, &[&str]) = ("convergence/v1", &["S", "value", "std_err", "step", "relative_change"]);
}

/// One CSV file's worth of rows.
#[derive(Debug, Clone)]
pub struct Table {
    pub file: String,
    pub schema: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, (schema, header): (&'static str, &'static [&'static str])) -> Self {
        Self { file: file.into(), schema, header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form, so reruns produce identical bytes.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamRecord {
    /// What the stream drew (paths, target curve, ...).
    pub label: String,
    pub seed: u64,
    /// Half-open range of chunk ids; chunk `k` is stream `k` of `seed`.
    pub chunk_ids: [u64; 2],
    pub chunk_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flag {
    /// `vanishing-by-bound`, `grid-bias`, `low-confidence`, `curvature`,
    /// `not-stabilized`, `not-monotone` or `excluded-x`.
    pub name: String,
    pub detail: String,
}

impl Flag {
    pub fn new(name: &str, detail: impl Into<String>) -> Self {
        Self { name: name.into(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub schema: String,
    pub rows: usize,
}

/// Everything needed to reproduce a run: replaying `config` (which holds
/// the seed actually used) regenerates every CSV byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub artifact_version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub generator: &'static str,
    pub streams: Vec<StreamRecord>,
    pub outputs: Vec<OutputRecord>,
    pub flags: Vec<Flag>,
    pub wall_time_secs: f64,
    pub result: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_table(dir: &Path, table: &Table) -> Result<PathBuf, CliError> {
    let path = dir.join(&table.file);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 1.5641895835477563] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(2.0), "2");
    }

    #[test]
    fn table_is_written_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("o.csv", schema::ORACLE);
        t.push(vec![num(0.0), num(1.0), num(1.5)]);
        let p = write_table(dir.path(), &t).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "x,S,value\n0,1,1.5\n");
    }
}
