//! Per-run files: `steps.csv`, `evals.csv` and `manifest.toml`.
//!
//! Column meanings are listed in `docs/outputs.md`. Empty CSV cells mean "not
//! applicable at this step" (no update, no controller, no promise yet).

use std::path::Path;

use nmps_core::pipeline::{CurvePoint, RunLog};
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io_err, LabError, Result};

pub const STEPS_SCHEMA_VERSION: u32 = 1;
pub const EVALS_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

pub const STEPS_FILE: &str = "steps.csv";
pub const EVALS_FILE: &str = "evals.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.txt";
pub const CONFIG_FILE: &str = "config.toml";
/// Written last; its presence marks a complete run.
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize)]
struct StepRow<'a> {
    step: usize,
    episode: usize,
    mode: &'a str,
    window_start: u8,
    action: usize,
    exploit_reward: f64,
    exploit_source: &'a str,
    exploit_update_reward: Option<f64>,
    explor_source: &'a str,
    explor_update_reward: Option<f64>,
    exploration_term: Option<f64>,
    promise: Option<f64>,
    coverage: usize,
}

pub fn write_steps(path: &Path, log: &RunLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in &log.steps {
        let u = s.update.as_ref();
        w.serialize(StepRow {
            step: s.step,
            episode: s.episode,
            mode: s.mode.map_or("", |m| m.name()),
            window_start: u8::from(s.window_start),
            action: s.action,
            exploit_reward: s.exploit_reward,
            exploit_source: u.and_then(|u| u.exploit_source).map_or("", |r| r.name()),
            exploit_update_reward: u.and_then(|u| u.combined_reward),
            explor_source: u.and_then(|u| u.explor_source).map_or("", |r| r.name()),
            explor_update_reward: u.and_then(|u| u.explor_reward),
            exploration_term: u.and_then(|u| u.exploration_term),
            promise: s.promise,
            coverage: s.coverage,
        })
        .map_err(csv_err(path))?;
    }
    if log.steps.is_empty() {
        w.write_record([
            "step",
            "episode",
            "mode",
            "window_start",
            "action",
            "exploit_reward",
            "exploit_source",
            "exploit_update_reward",
            "explor_source",
            "explor_update_reward",
            "exploration_term",
            "promise",
            "coverage",
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One row of `evals.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: usize,
    pub mean_return: f64,
    pub std_return: f64,
}

impl From<&CurvePoint> for EvalRow {
    fn from(p: &CurvePoint) -> Self {
        EvalRow {
            step: p.step,
            mean_return: p.mean_return,
            std_return: p.std_return,
        }
    }
}

pub fn write_evals(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if rows.is_empty() {
        w.write_record(["step", "mean_return", "std_return"]).map_err(csv_err(path))?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_evals(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

/// Completion record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub steps_schema: u32,
    pub evals_schema: u32,
    pub snapshot_format: u32,
    pub method: String,
    pub env: String,
    pub task: String,
    pub rho: f64,
    pub seed: u64,
    pub status: String,
    pub pretrain_steps: usize,
    pub snapshot_step: usize,
    pub coverage: usize,
    pub explore_fraction: f64,
    pub window_starts: usize,
    pub updates: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exploit_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub explor_entropy: Option<f64>,
    /// Skill recovery rate of the trained discriminator (skill methods only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skill_accuracy: Option<f64>,
    /// Mean return of the last evaluation; absent when fine-tuning is disabled.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_return: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_r2: Option<f64>,
}

pub const STATUS_COMPLETE: &str = "complete";

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).expect("manifest always serializes");
        std::fs::write(path, text).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| LabError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
