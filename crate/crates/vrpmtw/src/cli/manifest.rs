//! Reproducibility manifest written next to solver outputs: which command
//! ran, with which seed and configuration (hashed), and what came out.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestRow {
    pub instance: String,
    pub method: String,
    pub seed: u64,
    pub length: f64,
    pub duration: f64,
    pub vehicles_used: usize,
    pub solve_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub created_unix_seconds: u64,
    pub seed: u64,
    /// SHA-256 over the serialized arguments, so two manifests with the same
    /// hash came from the same configuration.
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub elapsed_seconds: f64,
    pub rows: Vec<ManifestRow>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config_json: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            config_sha256: sha256_hex(config_json.as_bytes()),
            workers: None,
            elapsed_seconds: 0.0,
            rows: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
