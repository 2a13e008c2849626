//! Run manifest: ties every stage artifact to the config, prompt digests,
//! and tool version that produced it, so a completed run is replayable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::write_atomic;
use crate::error::{Error, Result};
use crate::pipeline::config::PipelineConfig;
use crate::prompt::PromptSet;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRun {
    /// sha256 of the artifact file bytes.
    pub digest: String,
    /// Digest with the header timestamp normalized; stable across runs.
    pub canonical_digest: String,
    pub started_at: String,
    pub finished_at: String,
    pub record_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Shared `created_at` for every stage header in this run; reused on
    /// resume so re-written artifacts stay byte-identical.
    pub run_started_at: String,
    pub config: PipelineConfig,
    pub config_digest: String,
    pub prompt_digests: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRun>,
    /// Cluster ids in the order the summarize loop consumed them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub representative_order: Vec<i64>,
}

pub fn manifest_path(run_dir: &Path) -> PathBuf {
    run_dir.join(MANIFEST_FILE)
}

impl RunManifest {
    pub fn new(config: &PipelineConfig, prompts: &PromptSet) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            run_started_at: now_rfc3339(),
            config: config.clone(),
            config_digest: config.digest(),
            prompt_digests: prompts.digests(),
            stages: BTreeMap::new(),
            representative_order: Vec::new(),
        }
    }

    /// Load the existing manifest, or start a fresh one. When the stored
    /// config digest matches, the original start timestamp (and recorded
    /// stages) carry over so resumed artifacts hash identically.
    pub fn load_or_new(run_dir: &Path, config: &PipelineConfig, prompts: &PromptSet) -> Self {
        match Self::load(run_dir) {
            Ok(Some(existing)) if existing.config_digest == config.digest() => {
                let mut m = existing;
                m.tool_version = TOOL_VERSION.to_string();
                m.prompt_digests = prompts.digests();
                m
            }
            _ => Self::new(config, prompts),
        }
    }

    pub fn load(run_dir: &Path) -> Result<Option<RunManifest>> {
        let path = manifest_path(run_dir);
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        let manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Ok(Some(manifest))
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let mut bytes =
            serde_json::to_vec_pretty(self).map_err(|e| Error::Input(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(&manifest_path(run_dir), &bytes)
    }

    pub fn record_stage(&mut self, stage: crate::artifact::Stage, run: StageRun) {
        self.stages.insert(stage.to_string(), run);
    }
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
