//! Run manifest: what was asked for, what ran, what was written.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Ok,
    /// Finished, but some rows carry a failure status.
    Partial,
    Failed,
}

/// One unit of work: a temperature, direction and chain length, or a whole scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub name: String,
    pub status: TaskStatus,
    pub message: Option<String>,
    /// Temperature in hopping units (0 for the ground state).
    #[serde(with = "mixtop::io::extended_float::option")]
    pub temperature: Option<f64>,
    /// Temperature in units of the gap.
    #[serde(with = "mixtop::io::extended_float::option")]
    pub t_over_gap: Option<f64>,
    #[serde(with = "mixtop::io::extended_float::option")]
    pub beta: Option<f64>,
    pub outputs: Vec<String>,
    /// Command-specific summary numbers.
    pub results: serde_json::Value,
}

impl TaskRecord {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: TaskStatus::Ok,
            message: None,
            temperature: None,
            t_over_gap: None,
            beta: None,
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    pub fn fail(&mut self, message: impl std::fmt::Display) {
        self.status = TaskStatus::Failed;
        self.message = Some(message.to_string());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub command: String,
    pub format: Format,
    pub parallel: bool,
    pub jobs: Option<usize>,
    pub config: RunConfig,
    /// Gap around `mu`, when it was needed or could be computed.
    #[serde(with = "mixtop::io::extended_float::option")]
    pub gap: Option<f64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub tasks: Vec<TaskRecord>,
    /// Every file written, relative to the output directory, in write order.
    pub outputs: Vec<String>,
    pub exit_code: i32,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> mixtop::Result<()> {
        mixtop::io::write_json(&dir.join("manifest.json"), self)
    }

    pub fn read(dir: &Path) -> mixtop::Result<Self> {
        mixtop::io::read_json(&dir.join("manifest.json"))
    }
}
