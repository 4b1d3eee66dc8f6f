use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::LoadedConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one subcommand run: enough to re-derive its outputs.
/// Paths are written relative to the config or output directory so that
/// manifests do not depend on where the run happened.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub summary: Value,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    output_dir: PathBuf,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| negkb::Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

impl Manifest {
    pub fn new(command: &str, cfg: &LoadedConfig) -> Self {
        Manifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: cfg.hash.clone(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: Value::Null,
            base_dir: cfg.base_dir.clone(),
            output_dir: cfg.config.output_dir.clone(),
        }
    }

    fn display(&self, path: &Path) -> String {
        let rel = path
            .strip_prefix(&self.output_dir)
            .map(|p| Path::new("$OUT").join(p))
            .or_else(|_| path.strip_prefix(&self.base_dir).map(Path::to_path_buf))
            .unwrap_or_else(|_| path.to_path_buf());
        rel.to_string_lossy().replace('\\', "/")
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = FileDigest {
            path: self.display(path),
            sha256: sha256_file(path)?,
        };
        self.inputs.push(digest);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = FileDigest {
            path: self.display(path),
            sha256: sha256_file(path)?,
        };
        self.outputs.push(digest);
        Ok(())
    }

    /// Writes `manifests/<command>.json` under the output directory.
    pub fn write(&self) -> Result<PathBuf, CliError> {
        let dir = self.output_dir.join("manifests");
        std::fs::create_dir_all(&dir).map_err(|e| negkb::Error::io(&dir, e))?;
        let path = dir.join(format!("{}.json", self.command));
        let text = serde_json::to_string_pretty(self).map_err(negkb::Error::from)? + "\n";
        std::fs::write(&path, text).map_err(|e| negkb::Error::io(&path, e))?;
        Ok(path)
    }
}
