//! Deterministic JSON run reports with SHA-256 output digests.
//!
//! `run-report.json` is reproducible byte-for-byte for identical inputs;
//! wall-clock timings go to a separate `run-report.timings.json` so the
//! main report stays comparable across runs.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    /// Output path (relative to the report directory) → SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
struct Timings {
    schema_version: u32,
    command: String,
    stages_ms: BTreeMap<String, u128>,
}

pub struct ReportBuilder {
    command: String,
    parameters: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    stages_ms: BTreeMap<String, u128>,
    root: PathBuf,
    started: Instant,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl ReportBuilder {
    pub fn new(command: &str, root: &Path, parameters: BTreeMap<String, String>) -> Self {
        Self {
            command: command.into(),
            parameters,
            outputs: BTreeMap::new(),
            stages_ms: BTreeMap::new(),
            root: root.to_path_buf(),
            started: Instant::now(),
        }
    }

    /// Register a produced file; its digest is computed immediately.
    pub fn add_output(&mut self, path: &Path) -> anyhow::Result<()> {
        let rel = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.outputs.insert(rel, sha256_file(path)?);
        Ok(())
    }

    pub fn mark_stage(&mut self, name: &str) {
        let elapsed = self.started.elapsed().as_millis();
        self.stages_ms.insert(name.into(), elapsed);
    }

    /// Write `run-report.json` (deterministic) and
    /// `run-report.timings.json` (wall clock, not digested).
    pub fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.mark_stage("total");
        let report = RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            command: self.command.clone(),
            parameters: self.parameters,
            outputs: self.outputs,
        };
        let report_path = self.root.join("run-report.json");
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        std::fs::write(&report_path, bytes)?;
        let timings = Timings {
            schema_version: REPORT_SCHEMA_VERSION,
            command: self.command,
            stages_ms: self.stages_ms,
        };
        std::fs::write(
            self.root.join("run-report.timings.json"),
            serde_json::to_vec_pretty(&timings)?,
        )?;
        Ok(report_path)
    }
}
