//! Uniform access to generation and embedding backends with disk caching,
//! bounded retries, and bounded concurrency. Backends are pluggable: an
//! OpenAI-shaped HTTP client, a scripted mock, and a rule-based demo model.

mod cache;
mod demo;
mod http;
mod mock;

pub use cache::ResponseCache;
pub use demo::{DemoBackend, DEMO_DIMENSION};
pub use http::HttpBackend;
pub use mock::{hash_unit_vector, MockBackend, MockScript, RecordingBackend};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::artifact::sha256_hex;
use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: usize = 512;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_EMBED_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub seed: Option<u64>,
    pub stop_sequences: Vec<String>,
}

impl GenerationRequest {
    /// Deterministic defaults: temperature 0, fixed seed, no stop sequences.
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: Some(DEFAULT_SEED),
            stop_sequences: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(Error::Input("generation prompt must be non-empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::Input("max_tokens must be > 0".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::Input("temperature must be >= 0".into()));
        }
        Ok(())
    }

    /// Digest used for the response cache and for scripted mocks.
    pub fn prompt_digest(&self) -> String {
        sha256_hex(self.prompt.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    pub inputs: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_concurrency: usize,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint_url: "http://127.0.0.1:8080".into(),
            model_name: "local-model".into(),
            timeout_ms: 120_000,
            max_concurrency: 4,
            retries: 2,
            backoff_ms: 250,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout_ms == 0 {
            return Err(Error::Config("timeout_ms must be > 0".into()));
        }
        if self.max_concurrency == 0 {
            return Err(Error::Config("max_concurrency must be >= 1".into()));
        }
        Ok(())
    }
}

/// A raw model backend. Implementations do not cache or retry; the
/// [`Gateway`] layers those policies on top.
pub trait Backend: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse>;
    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f32>>>;
    /// Model identifier, used in cache keys.
    fn name(&self) -> &str;
}

/// Remove one trailing stop sequence, if present, and nothing else.
pub(crate) fn strip_trailing_stop(text: &str, stops: &[String]) -> String {
    for stop in stops {
        if !stop.is_empty() {
            if let Some(stripped) = text.strip_suffix(stop.as_str()) {
                return stripped.to_string();
            }
        }
    }
    text.to_string()
}

/// Cut after `max_tokens` whitespace-delimited tokens, preserving the
/// original whitespace of what remains. Returns (text, truncated).
pub(crate) fn truncate_whitespace_tokens(text: &str, max_tokens: usize) -> (String, bool) {
    let mut count = 0usize;
    let mut in_token = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            in_token = false;
        } else if !in_token {
            in_token = true;
            count += 1;
            if count > max_tokens {
                return (text[..i].trim_end().to_string(), true);
            }
        }
    }
    (text.to_string(), false)
}

/// Policy layer over a generation backend and an embedding backend:
/// disk response cache, bounded retries with linear backoff, and a
/// concurrency ceiling for batch generation.
pub struct Gateway {
    generator: Arc<dyn Backend>,
    embedder: Arc<dyn Backend>,
    gen_cfg: BackendConfig,
    embed_cfg: BackendConfig,
    cache: Option<ResponseCache>,
    bypass_cache: bool,
    embed_batch: usize,
    dimension: Mutex<Option<usize>>,
}

impl Gateway {
    pub fn new(
        generator: Arc<dyn Backend>,
        embedder: Arc<dyn Backend>,
        gen_cfg: BackendConfig,
        embed_cfg: BackendConfig,
    ) -> Result<Self> {
        gen_cfg.validate()?;
        embed_cfg.validate()?;
        Ok(Gateway {
            generator,
            embedder,
            gen_cfg,
            embed_cfg,
            cache: None,
            bypass_cache: false,
            embed_batch: DEFAULT_EMBED_BATCH,
            dimension: Mutex::new(None),
        })
    }

    /// Convenience constructor: one backend serving both roles, default config.
    pub fn shared(backend: Arc<dyn Backend>) -> Result<Self> {
        Gateway::new(backend.clone(), backend, BackendConfig::default(), BackendConfig::default())
    }

    pub fn with_cache_dir(mut self, dir: impl Into<std::path::PathBuf>) -> Result<Self> {
        self.cache = Some(ResponseCache::new(dir.into())?);
        Ok(self)
    }

    pub fn with_cache_bypass(mut self, bypass: bool) -> Self {
        self.bypass_cache = bypass;
        self
    }

    pub fn with_embed_batch(mut self, batch: usize) -> Self {
        self.embed_batch = batch.max(1);
        self
    }

    pub fn generator_model(&self) -> &str {
        self.generator.name()
    }

    pub fn embedder_model(&self) -> &str {
        self.embedder.name()
    }

    fn retrying<T>(cfg: &BackendConfig, mut call: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt: u32 = 0;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(Error::Backend(msg)) if attempt < cfg.retries => {
                    attempt += 1;
                    std::thread::sleep(Duration::from_millis(cfg.backoff_ms * attempt as u64));
                    let _ = msg;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse> {
        self.generate_inner(req, true)
    }

    /// Skip the cache read (the result still refreshes the cache) — used when
    /// re-sampling after a malformed response.
    pub fn generate_fresh(&self, req: &GenerationRequest) -> Result<GenerationResponse> {
        self.generate_inner(req, false)
    }

    fn generate_inner(&self, req: &GenerationRequest, read_cache: bool) -> Result<GenerationResponse> {
        req.validate()?;
        let key = self.generation_cache_key(req);
        if read_cache && !self.bypass_cache {
            if let Some(cache) = &self.cache {
                if let Some(hit) = cache.get_generation(self.generator.name(), &key) {
                    return Ok(hit);
                }
            }
        }
        let resp = Self::retrying(&self.gen_cfg, || self.generator.generate(req))?;
        if let Some(cache) = &self.cache {
            cache.put_generation(self.generator.name(), &key, &resp)?;
        }
        Ok(resp)
    }

    /// Digest over the full request, not just the prompt, so sampling
    /// parameters participate in cache identity.
    fn generation_cache_key(&self, req: &GenerationRequest) -> String {
        let canonical = serde_json::to_string(req).expect("request serializes");
        sha256_hex(canonical.as_bytes())
    }

    /// Run many generations with at most `max_concurrency` in flight;
    /// results come back in input order.
    pub fn generate_many(&self, reqs: &[GenerationRequest]) -> Result<Vec<GenerationResponse>> {
        for req in reqs {
            req.validate()?;
        }
        if reqs.is_empty() {
            return Ok(Vec::new());
        }
        let workers = self.gen_cfg.max_concurrency.min(reqs.len());
        if workers <= 1 {
            return reqs.iter().map(|r| self.generate(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<GenerationResponse>>>> =
            Mutex::new((0..reqs.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= reqs.len() {
                        break;
                    }
                    let out = self.generate(&reqs[i]);
                    slots.lock().expect("gateway mutex poisoned")[i] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .expect("gateway mutex poisoned")
            .into_iter()
            .map(|slot| slot.expect("every slot filled"))
            .collect()
    }

    pub fn embed(&self, inputs: &[String]) -> Result<EmbeddingBatch> {
        if inputs.is_empty() {
            return Err(Error::Input("embedding inputs must be non-empty".into()));
        }
        for (i, input) in inputs.iter().enumerate() {
            if input.is_empty() {
                return Err(Error::Input(format!("embedding input {i} is empty")));
            }
        }
        // resolve unique inputs so identical strings embed identically by construction
        let mut unique: Vec<&String> = Vec::new();
        let mut position: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for input in inputs {
            position.entry(input.as_str()).or_insert_with(|| {
                unique.push(input);
                unique.len() - 1
            });
        }

        let model = self.embedder.name().to_string();
        let mut resolved: Vec<Option<Vec<f32>>> = vec![None; unique.len()];
        if !self.bypass_cache {
            if let Some(cache) = &self.cache {
                for (i, input) in unique.iter().enumerate() {
                    resolved[i] = cache.get_embedding(&model, &sha256_hex(input.as_bytes()));
                }
            }
        }
        let missing: Vec<usize> = (0..unique.len()).filter(|&i| resolved[i].is_none()).collect();
        for chunk in missing.chunks(self.embed_batch) {
            let batch: Vec<String> = chunk.iter().map(|&i| unique[i].clone()).collect();
            let vectors = Self::retrying(&self.embed_cfg, || self.embedder.embed(&batch))?;
            if vectors.len() != batch.len() {
                return Err(Error::Backend(format!(
                    "embedding backend returned {} vectors for {} inputs",
                    vectors.len(),
                    batch.len()
                )));
            }
            for (&i, vector) in chunk.iter().zip(vectors) {
                if let Some(cache) = &self.cache {
                    cache.put_embedding(&model, &sha256_hex(unique[i].as_bytes()), &vector)?;
                }
                resolved[i] = Some(vector);
            }
        }

        let vectors: Vec<Vec<f32>> = inputs
            .iter()
            .map(|input| resolved[position[input.as_str()]].clone().expect("resolved"))
            .collect();
        let dimension = self.check_dimension(&vectors)?;
        Ok(EmbeddingBatch { inputs: inputs.to_vec(), vectors, dimension })
    }

    pub fn embed_one(&self, input: &str) -> Result<Vec<f32>> {
        let batch = self.embed(std::slice::from_ref(&input.to_string()))?;
        Ok(batch.vectors.into_iter().next().expect("one vector"))
    }

    /// Enforce a constant dimension within the batch and across the life of
    /// the gateway; drift signals a wrong backend model and is fatal.
    fn check_dimension(&self, vectors: &[Vec<f32>]) -> Result<usize> {
        let dimension = vectors.first().map(|v| v.len()).unwrap_or(0);
        if dimension == 0 {
            return Err(Error::Backend("embedding backend returned an empty vector".into()));
        }
        for v in vectors {
            if v.len() != dimension {
                return Err(Error::Backend(format!(
                    "embedding dimension drift within batch: {} vs {}",
                    v.len(),
                    dimension
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Backend("embedding contains a non-finite component".into()));
            }
        }
        let mut known = self.dimension.lock().expect("gateway mutex poisoned");
        match *known {
            Some(d) if d != dimension => Err(Error::Backend(format!(
                "embedding dimension drift across calls: {dimension} vs {d} (wrong backend model?)"
            ))),
            _ => {
                *known = Some(dimension);
                Ok(dimension)
            }
        }
    }
}
