use std::fs;
use std::path::Path;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crate::config::Settings;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to replay a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub settings: Settings,
    pub command: serde_json::Value,
    pub seeds: Vec<u64>,
    pub table_cache_keys: Vec<String>,
    pub started_at: String,
    pub wall_clock_seconds: f64,
}

pub struct RunClock {
    started_at: String,
    start: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        Self { started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true), start: Instant::now() }
    }

    pub fn manifest<C: Serialize>(
        &self,
        settings: &Settings,
        command: &C,
        table_cache_keys: Vec<String>,
    ) -> Result<RunManifest, CliError> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command_line: std::env::args().collect(),
            settings: settings.clone(),
            command: serde_json::to_value(command)?,
            seeds: vec![settings.seed],
            table_cache_keys,
            started_at: self.started_at.clone(),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        })
    }
}

/// Writes `manifest.json` into `dir`, replacing any previous one.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}
