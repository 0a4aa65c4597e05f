//! Run manifests: what a command read, wrote and with which settings.
//!
//! Manifests hold no timestamps or host details, so equal runs give equal
//! manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::io::{file_sha256, to_json, write_atomic};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of(path: &Path) -> CliResult<Self> {
        Ok(Artifact {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(Artifact::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        self.outputs.push(Artifact::of(path)?);
        Ok(())
    }

    /// Writes the manifest to `<primary output>.manifest.json`.
    pub fn write_beside(&self, primary: &Path) -> CliResult<PathBuf> {
        let path = manifest_path(primary);
        write_atomic(&path, to_json(self).as_bytes())?;
        Ok(path)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_output() {
        assert_eq!(manifest_path(Path::new("out/d.jsonl")), Path::new("out/d.jsonl.manifest.json"));
    }

    #[test]
    fn equal_runs_give_equal_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.txt");
        let write = || {
            write_atomic(&out, b"payload").unwrap();
            let mut m = RunManifest::new("gen", 7, serde_json::json!({"n": 1}));
            m.output(&out).unwrap();
            let p = m.write_beside(&out).unwrap();
            std::fs::read(p).unwrap()
        };
        assert_eq!(write(), write());
    }
}
