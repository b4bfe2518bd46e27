//! Append-only run manifest: one NDJSON record per subcommand invocation.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FNV-1a 64-bit content hash, hex-encoded. Cheap change detection for
/// configs and input files, not a cryptographic commitment.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::data(format!("hashing {}: {e}", path.display())))?;
    Ok(content_hash(&bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub config_hash: String,
    pub input_hashes: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

pub fn append_manifest(out_dir: &Path, entry: &ManifestEntry) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("manifest.ndjson");
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
    writeln!(file, "{}", serde_json::to_string(entry).map_err(Error::data)?)?;
    Ok(())
}
