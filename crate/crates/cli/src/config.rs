//! Pipeline configuration: one flat TOML file, overridable from the command
//! line with `--set key=value`.
//!
//! | key | meaning |
//! |-----|---------|
//! | `output_dir` | where artifacts go (default `out`) |
//! | `atomic_path`, `anion_path` | source corpora (CSV/TSV or canonical JSONL) |
//! | `split` | split read by `ingest` (default `train`) |
//! | `benchmark_source` | corpus sampled by `bench-sample` (defaults to `atomic_path`, test split) |
//! | `invalid_pool_path` | Invalid triples for the baseline (defaults to the judge training set) |
//! | `backend` | `mock` or `http` |
//! | `base_url`, `model`, `api_key_env` | chat endpoint, model name, name of the env var holding the key |
//! | `temperature`, `max_tokens`, `timeout_secs` | request settings |
//! | `concurrency`, `max_retries`, `cache_path` | client settings |
//! | `negation_mode` | `rule` or `generative` |
//! | `judge_sources`, `judge_per_relation_per_label` | judge training set shape |
//! | `benchmark_per_relation` | originals per relation in the human benchmark |
//! | `label_retries`, `max_quarantine_fraction` | labeling tolerance |
//! | `subset_sizes`, `variant_ablations`, `random_labels`, `export_training` | `build` outputs |
//! | `pipeline_stages` | stages run by `pipeline`, in order |
//! | `judge_seed`, `build_seed`, `subset_seed`, `random_label_seed`, `benchmark_seed` | named seeds |
//!
//! Relative paths are resolved against the directory holding the config
//! file. Seeds have no defaults: a stage that needs one fails until it is set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegationMode {
    Rule,
    Generative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub atomic_path: Option<PathBuf>,
    pub anion_path: Option<PathBuf>,
    pub split: String,
    pub benchmark_source: Option<PathBuf>,
    pub invalid_pool_path: Option<PathBuf>,

    pub backend: BackendKind,
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub concurrency: usize,
    pub max_retries: u32,
    pub cache_path: Option<PathBuf>,

    pub negation_mode: NegationMode,
    pub judge_sources: Vec<String>,
    pub judge_per_relation_per_label: usize,
    pub benchmark_per_relation: usize,
    pub label_retries: u32,
    pub max_quarantine_fraction: f64,
    pub subset_sizes: Vec<usize>,
    pub variant_ablations: bool,
    pub random_labels: bool,
    pub export_training: bool,
    pub pipeline_stages: Vec<String>,

    pub judge_seed: Option<u64>,
    pub build_seed: Option<u64>,
    pub subset_seed: Option<u64>,
    pub random_label_seed: Option<u64>,
    pub benchmark_seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output_dir: PathBuf::from("out"),
            atomic_path: None,
            anion_path: None,
            split: "train".into(),
            benchmark_source: None,
            invalid_pool_path: None,
            backend: BackendKind::Mock,
            base_url: "http://localhost:8000/v1".into(),
            model: "mock".into(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: 256,
            timeout_secs: 60,
            concurrency: 4,
            max_retries: 3,
            cache_path: None,
            negation_mode: NegationMode::Rule,
            judge_sources: vec!["ATOMIC".into(), "ANION".into()],
            judge_per_relation_per_label: 200,
            benchmark_per_relation: 200,
            label_retries: 2,
            max_quarantine_fraction: 0.1,
            subset_sizes: vec![1000, 10000],
            variant_ablations: true,
            random_labels: true,
            export_training: true,
            pipeline_stages: ["ingest", "negate", "bench-sample", "judge-build", "label", "stats", "build"]
                .map(String::from)
                .to_vec(),
            judge_seed: None,
            build_seed: None,
            subset_seed: None,
            random_label_seed: None,
            benchmark_seed: None,
        }
    }
}

/// A loaded configuration plus what is needed to describe it in manifests.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// Directory relative paths were resolved against.
    pub base_dir: PathBuf,
    /// SHA-256 of the effective settings, excluding `output_dir`.
    pub hash: String,
}

fn parse_override(raw: &str) -> Result<(String, toml::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{raw}`")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key, parsed))
}

fn canonical_json(table: &toml::Table) -> Result<Vec<u8>, CliError> {
    let value = serde_json::to_value(table).map_err(|e| CliError::Usage(e.to_string()))?;
    fn sort(v: serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(map) => {
                let mut entries: Vec<_> = map.into_iter().collect();
                entries.sort_by(|a, b| a.0.cmp(&b.0));
                serde_json::Value::Object(entries.into_iter().map(|(k, v)| (k, sort(v))).collect())
            }
            serde_json::Value::Array(items) => serde_json::Value::Array(items.into_iter().map(sort).collect()),
            other => other,
        }
    }
    serde_json::to_vec(&sort(value)).map_err(|e| CliError::Usage(e.to_string()))
}

impl LoadedConfig {
    /// Reads `path` (if any), applies overrides, resolves paths and checks
    /// that every referenced input exists.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid config: {}", e.message())))?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, dir)
            }
            None => (toml::Table::new(), PathBuf::new()),
        };
        for raw in overrides {
            let (key, value) = parse_override(raw)?;
            table.insert(key, value);
        }
        let mut hashed = table.clone();
        hashed.remove("output_dir");
        let hash = hex::encode(Sha256::digest(canonical_json(&hashed)?));
        let mut config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(format!("invalid config: {}", e.message())))?;
        let base = if base_dir.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            base_dir.clone()
        };
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.output_dir);
        for p in [
            &mut config.atomic_path,
            &mut config.anion_path,
            &mut config.benchmark_source,
            &mut config.invalid_pool_path,
            &mut config.cache_path,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        for p in [&config.atomic_path, &config.anion_path, &config.benchmark_source]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                return Err(CliError::Usage(format!("config references missing path {}", p.display())));
            }
        }
        if !(0.0..=1.0).contains(&config.max_quarantine_fraction) {
            return Err(CliError::Usage("max_quarantine_fraction must lie in [0, 1]".into()));
        }
        Ok(LoadedConfig {
            config,
            base_dir: base,
            hash,
        })
    }

    /// The value of a named seed, or a usage error when it is unset.
    pub fn seed(&self, name: &str) -> Result<u64, CliError> {
        let c = &self.config;
        let value = match name {
            "judge_seed" => c.judge_seed,
            "build_seed" => c.build_seed,
            "subset_seed" => c.subset_seed,
            "random_label_seed" => c.random_label_seed,
            "benchmark_seed" => c.benchmark_seed,
            _ => None,
        };
        value.ok_or_else(|| CliError::Usage(format!("seed `{name}` must be set in the config or with --set")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "judge_seed = 1\nsubset_sizes = [5]\n").unwrap();
        let a = LoadedConfig::load(Some(&path), &[]).unwrap();
        assert_eq!(a.config.judge_seed, Some(1));
        assert_eq!(a.config.output_dir, dir.path().join("out"));
        let b = LoadedConfig::load(Some(&path), &["output_dir=elsewhere".into()]).unwrap();
        assert_eq!(a.hash, b.hash);
        let c = LoadedConfig::load(Some(&path), &["judge_seed=2".into(), "model=gpt".into()]).unwrap();
        assert_ne!(a.hash, c.hash);
        assert_eq!(c.config.model, "gpt");
        assert!(matches!(c.seed("build_seed"), Err(CliError::Usage(_))));
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "atomic_path = \"missing.csv\"\n").unwrap();
        assert!(matches!(LoadedConfig::load(Some(&path), &[]), Err(CliError::Usage(_))));
        std::fs::write(&path, "no_such_key = 1\n").unwrap();
        assert!(matches!(LoadedConfig::load(Some(&path), &[]), Err(CliError::Usage(_))));
        assert!(matches!(LoadedConfig::load(None, &["novalue".into()]), Err(CliError::Usage(_))));
    }
}
