//! Append-only run manifests: one JSON array per directory, one entry per
//! run, referencing every file the run wrote by path and SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use plap_core::Result;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Effective configuration after merging the config file and flags.
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub wall_time_s: f64,
    pub threads: usize,
    pub version: String,
    /// Command-specific facts worth keeping (sweep mode, slacks, seeds).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub notes: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn hash_files(paths: &[PathBuf]) -> Result<Vec<FileHash>> {
    paths.iter().map(|p| Ok(FileHash { path: p.display().to_string(), sha256: sha256_file(p)? })).collect()
}

/// Appends `entry` to the manifest array at `path`, creating it if needed.
/// Earlier entries are carried over unchanged.
pub fn append(path: &Path, entry: &RunManifest) -> Result<()> {
    let mut entries: Vec<serde_json::Value> =
        if path.exists() { serde_json::from_slice(&fs::read(path)?)? } else { Vec::new() };
    entries.push(serde_json::to_value(entry)?);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_string_pretty(&entries)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
