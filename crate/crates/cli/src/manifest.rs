//! Per-run record of what was computed, from which configuration, and the
//! checksums of every file written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_digest: String,
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: Status,
    pub error: Option<String>,
    /// File name to SHA-256, for every artifact written so far.
    pub artifacts: BTreeMap<String, String>,
    /// Free-form progress notes; on failure this is the partial log.
    pub log: Vec<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config_digest: String, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config_digest,
            config,
            started_at: now(),
            finished_at: None,
            status: Status::Failed,
            error: None,
            artifacts: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::info!("{msg}");
        self.log.push(msg);
    }

    /// Record a written file, keyed by its file name.
    pub fn artifact(&mut self, path: &Path) -> Result<()> {
        let sum = sha256_file(path)?;
        let key = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.note(format!("wrote {}", path.display()));
        self.artifacts.insert(key, sum);
        Ok(())
    }

    pub fn finish(&mut self, outcome: &Result<()>) {
        self.finished_at = Some(now());
        match outcome {
            Ok(()) => self.status = Status::Ok,
            Err(e) => {
                self.status = Status::Failed;
                self.error = Some(format!("{e:#}"));
            }
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest_{command}.json")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(Self::file_name(&self.command));
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_and_records_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.txt");
        fs::write(&file, b"abc").unwrap();
        let mut m = RunManifest::start("synth", 3, "d".repeat(64), serde_json::json!({"seed": 3}));
        m.artifact(&file).unwrap();
        m.finish(&Ok(()));
        let path = m.write(dir.path()).unwrap();
        let back = RunManifest::read(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.status, Status::Ok);
        assert_eq!(
            back.artifacts["a.txt"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
