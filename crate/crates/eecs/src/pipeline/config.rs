//! Run configuration: a single JSON document, validated before any stage
//! runs. Unknown keys are rejected so typos fail loudly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterParams, Metric, Selection};
use crate::codebook::BuilderParams;
use crate::corpus::{default_stoplist, InputFormat, DEFAULT_MIN_CHARS};
use crate::error::{Error, Result};
use crate::gateway::BackendConfig;

/// Environment variables that override the backend endpoint URLs (and
/// nothing else).
pub const ENV_GEN_URL: &str = "EECS_GEN_URL";
pub const ENV_EMBED_URL: &str = "EECS_EMBED_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// OpenAI-shaped HTTP endpoints.
    Http,
    /// The built-in rule-based offline backend.
    Demo,
    /// Scripted responses loaded from a file.
    Mock { script: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub path: PathBuf,
    pub format: InputFormat,
    pub text_field: String,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { path: PathBuf::new(), format: InputFormat::Csv, text_field: "comment".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreeningConfig {
    pub min_chars: usize,
    /// Entries are compared against normalized text.
    pub stoplist: Vec<String>,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        ScreeningConfig {
            min_chars: DEFAULT_MIN_CHARS,
            stoplist: default_stoplist().into_iter().collect(),
        }
    }
}

impl ScreeningConfig {
    pub fn stoplist_set(&self) -> BTreeSet<String> {
        self.stoplist.iter().map(|s| crate::corpus::normalize(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendsConfig {
    pub kind: BackendKind,
    pub generation: BackendConfig,
    pub embedding: BackendConfig,
    /// Response cache directory; omitted = no cache.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub bypass_cache: bool,
    pub embed_batch: usize,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        BackendsConfig {
            kind: BackendKind::Demo,
            generation: BackendConfig::default(),
            embedding: BackendConfig::default(),
            cache_dir: None,
            bypass_cache: false,
            embed_batch: crate::gateway::DEFAULT_EMBED_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub metric: Metric,
    pub selection: Selection,
    /// Turn noise points into singleton clusters so every idea reaches the
    /// codebook stage.
    pub promote_noise: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let p = ClusterParams::default();
        ClusteringConfig {
            min_cluster_size: p.min_cluster_size,
            min_samples: p.min_samples,
            metric: p.metric,
            selection: p.selection,
            promote_noise: true,
        }
    }
}

impl ClusteringConfig {
    pub fn to_params(&self) -> ClusterParams {
        ClusterParams {
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples,
            metric: self.metric,
            selection: self.selection,
        }
    }
}

/// Values substituted into every prompt template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PromptBindings {
    pub persona: String,
    pub data_type: String,
    pub data_collection_context: String,
}

impl Default for PromptBindings {
    fn default() -> Self {
        PromptBindings {
            persona: "the world's best qualitative data analyst".into(),
            data_type: "student evaluation of teaching".into(),
            data_collection_context: "a university-wide end-of-term survey".into(),
        }
    }
}

impl PromptBindings {
    pub fn to_map(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("persona".to_string(), self.persona.clone()),
            ("data_type".to_string(), self.data_type.clone()),
            ("data_collection_context".to_string(), self.data_collection_context.clone()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub run_dir: PathBuf,
    pub input: InputConfig,
    pub screening: ScreeningConfig,
    pub backend: BackendsConfig,
    pub clustering: ClusteringConfig,
    pub builder: BuilderParams,
    pub bindings: PromptBindings,
    /// Directory of `<template>.txt` files overriding the built-in prompts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            run_dir: PathBuf::from("run"),
            input: InputConfig::default(),
            screening: ScreeningConfig::default(),
            backend: BackendsConfig::default(),
            clustering: ClusteringConfig::default(),
            builder: BuilderParams::default(),
            bindings: PromptBindings::default(),
            prompt_dir: None,
        }
    }
}

impl PipelineConfig {
    /// Read, resolve relative paths against the config file's directory,
    /// apply environment overrides, and validate.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Make every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.run_dir);
        resolve(&mut self.input.path);
        if let Some(dir) = &mut self.backend.cache_dir {
            resolve(dir);
        }
        if let Some(dir) = &mut self.prompt_dir {
            resolve(dir);
        }
        if let BackendKind::Mock { script } = &mut self.backend.kind {
            resolve(script);
        }
    }

    /// Environment overrides: backend URLs only.
    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(ENV_GEN_URL) {
            if !url.is_empty() {
                self.backend.generation.endpoint_url = url;
            }
        }
        if let Ok(url) = std::env::var(ENV_EMBED_URL) {
            if !url.is_empty() {
                self.backend.embedding.endpoint_url = url;
            }
        }
    }

    /// Apply one `--stage-override key=value` pair: `key` is a dotted path
    /// into the config document; `value` parses as a JSON literal when it
    /// can, else as a string.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self)
            .map_err(|e| Error::Config(format!("config serialization: {e}")))?;
        let mut cursor = &mut doc;
        let segments: Vec<&str> = key.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("override key '{key}' has an empty segment")));
        }
        for segment in &segments[..segments.len() - 1] {
            cursor = cursor
                .as_object_mut()
                .and_then(|m| m.get_mut(*segment))
                .ok_or_else(|| Error::Config(format!("override key '{key}': unknown field '{segment}'")))?;
        }
        let leaf = *segments.last().expect("non-empty key");
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override key '{key}' does not address an object field")))?
            .insert(leaf.to_string(), parsed);
        *self = serde_json::from_value(doc)
            .map_err(|e| Error::Config(format!("override '{key}={value}': {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_dir.as_os_str().is_empty() {
            return Err(Error::Config("run_dir must be set".into()));
        }
        if self.input.path.as_os_str().is_empty() {
            return Err(Error::Config("input.path must be set".into()));
        }
        if self.input.text_field.is_empty() {
            return Err(Error::Config("input.text_field must be non-empty".into()));
        }
        self.clustering.to_params().validate()?;
        self.builder.validate()?;
        self.backend.generation.validate()?;
        self.backend.embedding.validate()?;
        if self.backend.embed_batch == 0 {
            return Err(Error::Config("backend.embed_batch must be >= 1".into()));
        }
        for (name, value) in self.bindings.to_map() {
            if value.trim().is_empty() {
                return Err(Error::Config(format!("bindings.{name} must be non-empty")));
            }
        }
        if let BackendKind::Mock { script } = &self.backend.kind {
            if !script.is_file() {
                return Err(Error::Config(format!(
                    "backend.kind.mock.script {} does not exist",
                    script.display()
                )));
            }
        }
        Ok(())
    }

    /// Stable digest of the full config document.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        crate::artifact::sha256_hex(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn valid() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.input.path = PathBuf::from("/tmp/corpus.csv");
        cfg
    }

    #[test]
    fn defaults_validate_once_an_input_is_set() {
        assert!(PipelineConfig::default().validate().is_err());
        valid().validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"run_dirr": "x"}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn overrides_accept_json_literals_and_bare_strings() {
        let mut cfg = valid();
        cfg.apply_override("clustering.min_cluster_size", "3").unwrap();
        assert_eq!(cfg.clustering.min_cluster_size, 3);
        cfg.apply_override("clustering.metric", "euclidean").unwrap();
        assert_eq!(cfg.clustering.metric, Metric::Euclidean);
        cfg.apply_override("backend.bypass_cache", "true").unwrap();
        assert!(cfg.backend.bypass_cache);
        cfg.apply_override("bindings.data_type", "survey answer").unwrap();
        assert_eq!(cfg.bindings.data_type, "survey answer");
    }

    #[test]
    fn overrides_with_unknown_fields_fail() {
        let mut cfg = valid();
        assert!(cfg.apply_override("clustering.nope", "1").is_err());
        assert!(cfg.apply_override("nope.deep", "1").is_err());
        // type errors surface too
        assert!(cfg.apply_override("clustering.min_cluster_size", "\"three\"").is_err());
    }

    #[test]
    fn invalid_cluster_params_fail_validation() {
        let mut cfg = valid();
        cfg.clustering.min_samples = 9;
        cfg.clustering.min_cluster_size = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_the_config_dir() {
        let mut cfg = valid();
        cfg.input.path = PathBuf::from("data/corpus.csv");
        cfg.run_dir = PathBuf::from("out");
        cfg.resolve_paths(Path::new("/srv/job"));
        assert_eq!(cfg.input.path, PathBuf::from("/srv/job/data/corpus.csv"));
        assert_eq!(cfg.run_dir, PathBuf::from("/srv/job/out"));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let cfg = valid();
        assert_eq!(cfg.digest(), cfg.digest());
        let mut other = valid();
        other.builder.k = 7;
        assert_ne!(cfg.digest(), other.digest());
    }

    #[test]
    fn env_vars_override_endpoints_only() {
        let mut cfg = valid();
        std::env::set_var(ENV_GEN_URL, "http://10.0.0.1:9999");
        std::env::set_var(ENV_EMBED_URL, "http://10.0.0.2:9999");
        cfg.apply_env();
        std::env::remove_var(ENV_GEN_URL);
        std::env::remove_var(ENV_EMBED_URL);
        assert_eq!(cfg.backend.generation.endpoint_url, "http://10.0.0.1:9999");
        assert_eq!(cfg.backend.embedding.endpoint_url, "http://10.0.0.2:9999");
        assert_eq!(cfg.backend.generation.model_name, BackendConfig::default().model_name);
    }
}
