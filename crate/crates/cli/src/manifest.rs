use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run a command: resolved parameters plus the
/// hashes of the files it read.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Command,
    pub inputs: Vec<InputHash>,
}

impl RunManifest {
    pub fn new(invocation: Command, inputs: Vec<InputHash>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            invocation,
            inputs,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads input files and records their hashes in order of first use.
#[derive(Debug, Default)]
pub struct InputLog {
    entries: Vec<InputHash>,
}

impl InputLog {
    pub fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path)
            .with_context(|| format!("cannot read {role} file {}", path.display()))?;
        self.entries.push(InputHash {
            role: role.to_owned(),
            path: path.to_path_buf(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn into_entries(self) -> Vec<InputHash> {
        self.entries
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
pub struct ManifestFile<'a> {
    pub manifest: &'a RunManifest,
}
