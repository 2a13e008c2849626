//! Scripted offline backend: generations looked up by prompt digest,
//! embeddings by exact input text with a deterministic hash-vector fallback.
//! A recording wrapper captures any live backend into a replayable script.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{sha256_hex, write_atomic};
use crate::error::{Error, Result};
use crate::gateway::{
    strip_trailing_stop, truncate_whitespace_tokens, Backend, FinishReason, GenerationRequest,
    GenerationResponse,
};

/// Deterministic unit vector derived from the text alone; used when an
/// embedding input is missing from the script table.
pub fn hash_unit_vector(text: &str, dimension: usize) -> Vec<f32> {
    assert!(dimension > 0, "dimension must be positive");
    let mut bytes = Vec::with_capacity(dimension * 4);
    let mut counter = 0u32;
    while bytes.len() < dimension * 4 {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update(counter.to_le_bytes());
        bytes.extend_from_slice(&hasher.finalize());
        counter += 1;
    }
    let mut components: Vec<f64> = (0..dimension)
        .map(|i| {
            let word = u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().expect("4 bytes"));
            (word as f64 / u32::MAX as f64) * 2.0 - 1.0
        })
        .collect();
    let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        components[0] = 1.0;
        return components.iter().map(|&x| x as f32).collect();
    }
    components.iter().map(|&x| (x / norm) as f32).collect()
}

/// Everything a [`MockBackend`] needs to replay a run bit-for-bit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    /// Embedding width used by the hash fallback.
    pub dimension: usize,
    /// sha256(prompt) -> response text.
    pub responses: BTreeMap<String, String>,
    /// exact input text -> vector.
    pub embeddings: BTreeMap<String, Vec<f32>>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read mock script {}: {e}", path.display())))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("invalid mock script {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(self).expect("script serializes");
        body.push(b'\n');
        write_atomic(path, &body)
    }

    pub fn script_response(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses.insert(sha256_hex(prompt.as_bytes()), response.into());
    }
}

pub struct MockBackend {
    script: MockScript,
    model: String,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend { script, model: "mock".into() }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

impl Backend for MockBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse> {
        let digest = req.prompt_digest();
        let text = self.script.responses.get(&digest).ok_or_else(|| {
            Error::Backend(format!("mock script has no response for prompt digest {digest}"))
        })?;
        let (text, truncated) = truncate_whitespace_tokens(text, req.max_tokens);
        Ok(GenerationResponse {
            text: strip_trailing_stop(&text, &req.stop_sequences),
            finish_reason: if truncated { FinishReason::Length } else { FinishReason::Stop },
            latency_ms: 0,
        })
    }

    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f32>>> {
        if self.script.dimension == 0 {
            return Err(Error::Backend("mock script declares dimension 0".into()));
        }
        Ok(inputs
            .iter()
            .map(|input| {
                self.script
                    .embeddings
                    .get(input)
                    .cloned()
                    .unwrap_or_else(|| hash_unit_vector(input, self.script.dimension))
            })
            .collect())
    }

    fn name(&self) -> &str {
        &self.model
    }
}

/// Pass-through backend that records every exchange into a [`MockScript`].
pub struct RecordingBackend<B: Backend> {
    inner: B,
    script: Mutex<MockScript>,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, dimension: usize) -> Self {
        RecordingBackend {
            inner,
            script: Mutex::new(MockScript { dimension, ..MockScript::default() }),
        }
    }

    pub fn script(&self) -> MockScript {
        self.script.lock().expect("recording mutex poisoned").clone()
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse> {
        let resp = self.inner.generate(req)?;
        self.script
            .lock()
            .expect("recording mutex poisoned")
            .responses
            .insert(req.prompt_digest(), resp.text.clone());
        Ok(resp)
    }

    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f32>>> {
        let vectors = self.inner.embed(inputs)?;
        let mut script = self.script.lock().expect("recording mutex poisoned");
        for (input, vector) in inputs.iter().zip(&vectors) {
            script.embeddings.insert(input.clone(), vector.clone());
        }
        Ok(vectors)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
