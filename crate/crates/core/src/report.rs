//! Machine-readable run reports.
//!
//! Every CLI invocation can emit a JSON report capturing what ran, with what
//! configuration, the metrics it computed, and SHA-256 digests of every file
//! it read or wrote. Keys are emitted in sorted order, so two runs over the
//! same inputs produce byte-identical reports except for `wall_time_ms`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex-encoded SHA-256 digest of a file's contents.
pub fn sha256_hex_of_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

/// Accumulates the facts of one run and serializes them as sorted-key JSON.
#[derive(Debug, Serialize)]
pub struct RunReport {
    /// The subcommand that ran, e.g. `"stabilize"`.
    command: String,
    /// Effective configuration after defaulting, e.g. `m`, `seed`.
    config: BTreeMap<String, serde_json::Value>,
    /// Input path → SHA-256 digest.
    inputs: BTreeMap<String, String>,
    /// Scalar results, e.g. `rmse_vs_input`.
    metrics: BTreeMap<String, f64>,
    /// Output path → SHA-256 digest, recorded after the file is written.
    outputs: BTreeMap<String, String>,
    /// Elapsed wall time. The only non-deterministic field.
    wall_time_ms: u64,
    #[serde(skip)]
    started: Instant,
}

impl RunReport {
    /// Starts a report (and its wall-time clock) for `command`.
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            metrics: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_time_ms: 0,
            started: Instant::now(),
        }
    }

    /// Records one effective configuration value.
    pub fn set_config(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    /// Records a scalar result.
    pub fn add_metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    /// Digests and records an input file.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_hex_of_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Digests and records an output file (call after writing it).
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_hex_of_file(path)?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Stops the clock and renders the report as pretty JSON with sorted keys.
    pub fn finish(mut self) -> String {
        self.wall_time_ms = self.started.elapsed().as_millis() as u64;
        let value = serde_json::to_value(&self).expect("report fields are all serializable");
        serde_json::to_string_pretty(&value).expect("JSON value renders")
    }
}
