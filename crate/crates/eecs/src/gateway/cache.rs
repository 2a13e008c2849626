//! Disk cache for backend responses, keyed by (model name, request digest).
//! Corrupt or missing entries read as misses; writes are atomic.

use std::fs;
use std::path::PathBuf;

use crate::error::Result;
use crate::gateway::GenerationResponse;

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    fn entry_path(&self, kind: &str, model: &str, digest: &str) -> PathBuf {
        let safe_model: String = model
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
            .collect();
        self.dir.join(kind).join(safe_model).join(format!("{digest}.json"))
    }

    fn read<T: serde::de::DeserializeOwned>(&self, path: &PathBuf) -> Option<T> {
        let bytes = fs::read(path).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn write<T: serde::Serialize>(&self, path: &PathBuf, value: &T) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(value).expect("cache value serializes"))?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn get_generation(&self, model: &str, digest: &str) -> Option<GenerationResponse> {
        self.read(&self.entry_path("generation", model, digest))
    }

    pub fn put_generation(&self, model: &str, digest: &str, resp: &GenerationResponse) -> Result<()> {
        self.write(&self.entry_path("generation", model, digest), resp)
    }

    pub fn get_embedding(&self, model: &str, digest: &str) -> Option<Vec<f32>> {
        self.read(&self.entry_path("embedding", model, digest))
    }

    pub fn put_embedding(&self, model: &str, digest: &str, vector: &[f32]) -> Result<()> {
        self.write(&self.entry_path("embedding", model, digest), &vector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::FinishReason;

    #[test]
    fn round_trips_and_tolerates_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path().to_path_buf()).unwrap();
        let resp = GenerationResponse {
            text: "hello".into(),
            finish_reason: FinishReason::Stop,
            latency_ms: 12,
        };
        assert!(cache.get_generation("m", "d1").is_none());
        cache.put_generation("m", "d1", &resp).unwrap();
        assert_eq!(cache.get_generation("m", "d1").unwrap(), resp);

        cache.put_embedding("m", "d2", &[1.0, 2.0]).unwrap();
        assert_eq!(cache.get_embedding("m", "d2").unwrap(), vec![1.0, 2.0]);

        // models with path-hostile names are sanitized, not split into dirs
        cache.put_generation("a/b:c", "d3", &resp).unwrap();
        assert_eq!(cache.get_generation("a/b:c", "d3").unwrap(), resp);

        let path = cache.entry_path("generation", "m", "d1");
        std::fs::write(&path, b"{not json").unwrap();
        assert!(cache.get_generation("m", "d1").is_none());
    }
}
