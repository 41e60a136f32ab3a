//! Run manifests: the resolved inputs of every command, written next to its
//! output. Everything except `timing` is deterministic.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct Timing {
    pub started_unix: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<&'static str, String>,
    pub outputs: BTreeMap<&'static str, String>,
    pub timing: Timing,
}

/// Collects a manifest while a command runs.
pub struct Recorder {
    manifest: RunManifest,
    start: Instant,
}

impl Recorder {
    pub fn start(command: &'static str, seed: u64) -> Self {
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        Recorder {
            manifest: RunManifest {
                command,
                version: env!("CARGO_PKG_VERSION"),
                seed,
                config: serde_json::Value::Null,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                timing: Timing {
                    started_unix,
                    wall_seconds: 0.0,
                },
            },
            start: Instant::now(),
        }
    }

    pub fn config(&mut self, config: impl Serialize) {
        self.manifest.config = serde_json::to_value(config).expect("config serializes to JSON");
    }

    pub fn input(&mut self, name: &'static str, path: &Path) {
        self.manifest
            .inputs
            .insert(name, path.display().to_string());
    }

    pub fn output(&mut self, name: &'static str, path: &Path) {
        self.manifest
            .outputs
            .insert(name, path.display().to_string());
    }

    /// Writes `<primary>.manifest.json` and returns its path.
    pub fn finish(mut self, primary: &Path) -> Result<PathBuf, Failure> {
        self.manifest.timing.wall_seconds = self.start.elapsed().as_secs_f64();
        let path = manifest_path(primary);
        let text =
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes to JSON");
        std::fs::write(&path, text + "\n")
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}
