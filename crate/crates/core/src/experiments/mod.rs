//! Experiment harness: configs, eps-sweeps and their CSV/JSON output.
//!
//! Every sweep returns a [`SweepResult`] whose rows are ordered as the
//! config's `eps_list` (descending) or by time, and whose checks record
//! the configured assertions.

mod config;
mod runs;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{
    load_config, parse_config, DataConfig, ExperimentConfig, ExperimentKind, GridConfig,
    ModelConfig, ProfileKind, SobolevConfig,
};
pub use runs::{
    gaussian_amplitudes, predicted_sobolev_slope, run_convergence, run_inflation, run_more_weakly,
    run_sobolev_asymptotics, run_zero_mode, simulate_trajectory, sobolev_profile_norm,
    TrajectoryPoint,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: ExperimentKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub fitted_slopes: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub config: ExperimentConfig,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            experiment: self.experiment,
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_hash: git_hash(),
            columns: self.columns.clone(),
            fitted_slopes: self.fitted_slopes.clone(),
            checks: self.checks.clone(),
            passed: self.passed(),
            config: self.config.clone(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(&self.columns).map_err(fmt)?;
        for row in &self.rows {
            w.serialize(row).map_err(fmt)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Sidecar JSON written next to every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub experiment: ExperimentKind,
    pub version: String,
    pub git_hash: Option<String>,
    pub columns: Vec<String>,
    pub fitted_slopes: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub config: ExperimentConfig,
}

fn git_hash() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// Runs the experiment named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<SweepResult> {
    match cfg.kind()? {
        ExperimentKind::Converge => run_convergence(cfg),
        ExperimentKind::ZeroMode => run_zero_mode(cfg),
        ExperimentKind::MoreWeakly => run_more_weakly(cfg),
        ExperimentKind::Inflate => run_inflation(cfg),
        ExperimentKind::SobolevAsymptotics => run_sobolev_asymptotics(cfg),
    }
}

// Write-then-rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes `<experiment>.csv` and `<experiment>.json` into `dir`.
pub fn emit_results(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let name = result.experiment.name();
    let csv_path = dir.join(format!("{name}.csv"));
    let json_path = dir.join(format!("{name}.json"));
    write_atomic(&csv_path, result.to_csv()?.as_bytes())?;
    let json = serde_json::to_string_pretty(&result.metadata())
        .map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&json_path, json.as_bytes())?;
    Ok((csv_path, json_path))
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
}
