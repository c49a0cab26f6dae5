//! Atomic file output and run provenance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Writes `bytes` to a temp file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot replace {}", path.display()))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(InputDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

/// Settings echoed into every artifact so the producing command can be rerun.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub tool_version: String,
    pub argv: Vec<String>,
    pub sample_rate: f64,
    pub window_seconds: f64,
    pub n_mfcc: usize,
    pub stats: String,
    pub per_class: usize,
    pub base_seed: u64,
    pub models: Vec<String>,
    pub out: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config: RunConfig,
    pub inputs: Vec<InputDigest>,
}

impl Provenance {
    pub fn new(config: RunConfig, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs.iter().map(|p| digest_file(p)).collect::<Result<_>>()?;
        Ok(Self { config, inputs })
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("provenance serializes")
    }

    /// `<out>/<command>.run.json`, with optional command-specific details.
    pub fn write(&self, out: &Path, details: serde_json::Value) -> Result<PathBuf> {
        let path = out.join(format!("{}.run.json", self.config.command));
        let mut doc = self.to_value();
        if !details.is_null() {
            doc["details"] = details;
        }
        write_json(&path, &doc)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path().join("a")).unwrap().count(), 1);
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            digest_file(&p).unwrap().sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
