//! Run manifests: every stage records what it read, what it wrote, and the
//! digests that let a re-run be verified byte for byte.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Digest of the effective configuration, when the stage takes one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_digest: Option<String>,
    /// Input name -> sha256.
    pub input_digests: BTreeMap<String, String>,
    /// Output file name -> sha256.
    pub output_digests: BTreeMap<String, String>,
    /// Unix seconds; informational only, never part of any digest.
    pub started_at: u64,
    pub finished_at: u64,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file =
        std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

impl RunManifest {
    pub fn start(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            config_digest: None,
            input_digests: BTreeMap::new(),
            output_digests: BTreeMap::new(),
            started_at: unix_now(),
            finished_at: 0,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.input_digests
            .insert(display_name(path), sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        self.output_digests
            .insert(display_name(path), sha256_file(path)?);
        Ok(())
    }

    /// Digest outputs, stamp the finish time and write `manifest.json` into
    /// `out_dir`.
    pub fn finish(mut self, out_dir: &Path) -> Result<RunManifest> {
        self.finished_at = unix_now();
        let path = out_dir.join(MANIFEST_FILE);
        let file =
            std::fs::File::create(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &self)?;
        Ok(self)
    }

    pub fn load(out_dir: &Path) -> Result<RunManifest> {
        let path = out_dir.join(MANIFEST_FILE);
        let file =
            std::fs::File::open(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_digest_matches_buffer_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        std::fs::write(&path, b"sideout").unwrap();
        assert_eq!(sha256_file(&path).unwrap(), sha256_hex(b"sideout"));
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, b"a,b\n1,2\n").unwrap();
        let mut m = RunManifest::start("report");
        m.seed = Some(42);
        m.record_output(&path).unwrap();
        let written = m.finish(dir.path()).unwrap();
        let loaded = RunManifest::load(dir.path()).unwrap();
        assert_eq!(loaded.command, "report");
        assert_eq!(loaded.seed, Some(42));
        assert_eq!(loaded.output_digests, written.output_digests);
        assert_eq!(loaded.output_digests.len(), 1);
        assert!(loaded.output_digests.contains_key("out.csv"));
    }
}
