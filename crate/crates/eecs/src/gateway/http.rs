//! OpenAI-shaped HTTP backend: POST `<endpoint>/v1/chat/completions` for
//! generation, POST `<endpoint>/v1/embeddings` for embeddings. Works against
//! any local server speaking that de-facto protocol.

use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::gateway::{
    strip_trailing_stop, Backend, BackendConfig, FinishReason, GenerationRequest,
    GenerationResponse,
};

pub struct HttpBackend {
    cfg: BackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| Error::Backend(format!("failed to build HTTP client: {e}")))?;
        Ok(HttpBackend { cfg, client })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.cfg.endpoint_url.trim_end_matches('/'), path)
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value> {
        let url = self.url(path);
        let response = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| Error::Backend(format!("POST {url} failed: {e}")))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| Error::Backend(format!("POST {url} body unreadable: {e}")))?;
        if !status.is_success() {
            let snippet: String = text.chars().take(200).collect();
            return Err(Error::Backend(format!("POST {url} returned {status}: {snippet}")));
        }
        serde_json::from_str(&text)
            .map_err(|e| Error::Backend(format!("POST {url} returned invalid JSON: {e}")))
    }
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingList {
    data: Vec<EmbeddingRow>,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    index: usize,
    embedding: Vec<f32>,
}

impl Backend for HttpBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse> {
        let mut body = json!({
            "model": self.cfg.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        if !req.stop_sequences.is_empty() {
            body["stop"] = json!(req.stop_sequences);
        }
        let started = Instant::now();
        let value = self.post("v1/chat/completions", &body)?;
        let latency_ms = started.elapsed().as_millis() as u64;

        let completion: ChatCompletion = serde_json::from_value(value)
            .map_err(|e| Error::Backend(format!("unexpected chat completion shape: {e}")))?;
        let choice = completion
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Backend("backend returned no choices".into()))?;
        let text = choice.message.content.unwrap_or_default();
        if text.is_empty() {
            return Err(Error::Backend("backend returned an empty response".into()));
        }
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            Some("stop") | None => FinishReason::Stop,
            Some(_) => FinishReason::Error,
        };
        Ok(GenerationResponse {
            text: strip_trailing_stop(&text, &req.stop_sequences),
            finish_reason,
            latency_ms,
        })
    }

    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f32>>> {
        let body = json!({ "model": self.cfg.model_name, "input": inputs });
        let value = self.post("v1/embeddings", &body)?;
        let list: EmbeddingList = serde_json::from_value(value)
            .map_err(|e| Error::Backend(format!("unexpected embeddings shape: {e}")))?;
        if list.data.len() != inputs.len() {
            return Err(Error::Backend(format!(
                "backend returned {} embeddings for {} inputs",
                list.data.len(),
                inputs.len()
            )));
        }
        let mut rows = list.data;
        rows.sort_by_key(|r| r.index);
        Ok(rows.into_iter().map(|r| r.embedding).collect())
    }

    fn name(&self) -> &str {
        &self.cfg.model_name
    }
}
