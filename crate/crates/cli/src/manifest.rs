//! Manifests written next to every command's output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

impl FileEntry {
    pub fn of(dir: &Path, name: &str) -> Result<Self, CliError> {
        let bytes = std::fs::read(dir.join(name))?;
        Ok(Self {
            path: name.into(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Everything needed to reproduce a command's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: Config,
    pub seeds: Vec<u64>,
    pub schema: String,
    pub schema_version: u32,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(command: &str, config: &Config, files: Vec<FileEntry>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            config: config.clone(),
            seeds: config.experiment.seeds.clone(),
            schema: tof_mcl::sim::SCHEMA_NAME.into(),
            schema_version: tof_mcl::sim::SCHEMA_VERSION,
            files,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
