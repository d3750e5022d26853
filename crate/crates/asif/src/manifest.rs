//! Run manifests and output writing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::sha256_hex;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the command's settings.
    pub config_sha256: String,
    pub dataset_sha256: Option<String>,
    pub seed: u64,
    /// Seconds since the Unix epoch; `None` under `--reproducible`.
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Collects the outputs of one command run under one output directory.
#[derive(Debug)]
pub struct RunWriter {
    pub out_dir: PathBuf,
    pub reproducible: bool,
    manifest: RunManifest,
}

impl RunWriter {
    pub fn new(
        command: &str,
        out_dir: &Path,
        settings: &serde_json::Value,
        dataset_sha256: Option<String>,
        seed: u64,
        reproducible: bool,
    ) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let canonical = serde_json::to_string(settings).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(RunWriter {
            out_dir: out_dir.to_path_buf(),
            reproducible,
            manifest: RunManifest {
                command: command.into(),
                tool_version: TOOL_VERSION.into(),
                config_sha256: sha256_hex(canonical.as_bytes()),
                dataset_sha256,
                seed,
                started_at: (!reproducible).then(now),
                finished_at: None,
                outputs: Vec::new(),
            },
        })
    }

    pub fn manifest_name(&self) -> String {
        format!("{}.manifest.json", self.manifest.command)
    }

    pub fn timestamp(&self) -> Option<String> {
        (!self.reproducible).then(|| now().to_string())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(name.into());
        Ok(path)
    }

    /// Writes `{"manifest": <manifest file>, "result": value}`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            manifest: String,
            result: &'a T,
        }
        let wrapped = Wrapped { manifest: self.manifest_name(), result: value };
        let mut text = serde_json::to_string_pretty(&wrapped).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finished_at = (!self.reproducible).then(now);
        let path = self.out_dir.join(self.manifest_name());
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_runs_write_identical_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let settings = serde_json::json!({"m": 10});
        let run = || {
            let mut w = RunWriter::new("demo", dir.path(), &settings, Some("abc".into()), 4, true).unwrap();
            w.write_json("out.json", &vec![1.5, 2.0]).unwrap();
            w.finish().unwrap();
            (fs::read(dir.path().join("demo.manifest.json")).unwrap(), fs::read(dir.path().join("out.json")).unwrap())
        };
        let a = run();
        assert_eq!(a, run());
        let out: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
        assert_eq!(out["manifest"], "demo.manifest.json");
        let m: serde_json::Value = serde_json::from_slice(&a.0).unwrap();
        assert_eq!(m["outputs"][0], "out.json");
        assert!(m["started_at"].is_null());
    }

    #[test]
    fn timestamps_present_by_default() {
        let dir = tempfile::tempdir().unwrap();
        let w = RunWriter::new("demo", dir.path(), &serde_json::json!({}), None, 0, false).unwrap();
        assert!(w.timestamp().is_some());
        assert!(w.finish().unwrap().finished_at.is_some());
    }
}
