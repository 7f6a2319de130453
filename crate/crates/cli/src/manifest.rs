//! Run manifest: spec hash, version, timing and checksums of every output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub spec_sha256: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub strict_failures: Vec<String>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checksums of `files` as they are on disk now.
pub fn entries(dir: &Path, files: &[String]) -> std::io::Result<Vec<FileEntry>> {
    files
        .iter()
        .map(|name| {
            let bytes = fs::read(dir.join(name))?;
            Ok(FileEntry { name: name.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
        })
        .collect()
}

pub fn write(dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    s.push('\n');
    fs::write(dir.join(MANIFEST), s)
}

/// Names of listed files whose current checksum differs (or that vanished).
pub fn verify(dir: &Path) -> std::io::Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(std::io::Error::other)?;
    Ok(m.files
        .iter()
        .filter(|f| fs::read(dir.join(&f.name)).map_or(true, |b| sha256_hex(&b) != f.sha256))
        .map(|f| f.name.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
