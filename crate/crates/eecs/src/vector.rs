//! Embedding vectors, cosine similarity, and exact top-k retrieval.
//!
//! Components are stored as f32; all accumulation happens in f64. Retrieval
//! is an exact linear scan — no approximate index — with ties broken by
//! insertion order.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A retrieval hit: entry id plus cosine similarity in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Cosine similarity, clamped to [-1, 1] against floating error.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "cosine: dimension mismatch ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Input("cosine: zero-norm vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Scale to unit L2 norm (f64 arithmetic, cast back to f32).
pub fn l2_normalized(v: &[f32]) -> Result<Vec<f32>> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::Input("normalize: zero-norm vector".into()));
    }
    Ok(v.iter().map(|x| (*x as f64 / n) as f32).collect())
}

/// Fixed-dimension store of vectors keyed by id, insertion order preserved.
#[derive(Debug, Clone, Default)]
pub struct VectorStore {
    dimension: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl VectorStore {
    pub fn new(dimension: usize) -> Self {
        VectorStore { dimension, ids: Vec::new(), vectors: Vec::new(), index: HashMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dimension {
            return Err(Error::Input(format!(
                "store expects dimension {}, got {} for id {id:?}",
                self.dimension,
                vector.len()
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite component in vector for id {id:?}")));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Input(format!("duplicate id {id:?}")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    /// Exact top-k by cosine similarity, descending; ties keep insertion order.
    pub fn top_k(&self, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::Input("top_k: k must be >= 1".into()));
        }
        if self.is_empty() {
            return Ok(Vec::new());
        }
        if query.len() != self.dimension {
            return Err(Error::Input(format!(
                "top_k: query dimension {} != store dimension {}",
                query.len(),
                self.dimension
            )));
        }
        let mut scored: Vec<(usize, f64)> = Vec::with_capacity(self.len());
        for (i, v) in self.vectors.iter().enumerate() {
            scored.push((i, cosine(query, v)?));
        }
        // stable sort on descending similarity preserves insertion order on ties
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("similarities are finite"));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, similarity)| Neighbor { id: self.ids[i].clone(), similarity })
            .collect())
    }

    /// The single most similar entry; `None` for an empty store.
    pub fn argmax_similarity(&self, query: &[f32]) -> Result<Option<Neighbor>> {
        Ok(self.top_k(query, 1)?.into_iter().next())
    }

    /// Binary sidecar: header (dimension u32 LE, count u64 LE) then per entry
    /// id length u32 LE, id bytes, `dimension` f32 LE components.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(&(self.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (id, vector) in self.ids.iter().zip(&self.vectors) {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for component in vector {
                w.write_all(&component.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_sidecar(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut r = BufReader::new(file);
        let mut u32buf = [0u8; 4];
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u32buf)?;
        let dimension = u32::from_le_bytes(u32buf) as usize;
        r.read_exact(&mut u64buf)?;
        let count = u64::from_le_bytes(u64buf);
        let mut store = VectorStore::new(dimension);
        for _ in 0..count {
            r.read_exact(&mut u32buf)?;
            let id_len = u32::from_le_bytes(u32buf) as usize;
            let mut id_bytes = vec![0u8; id_len];
            r.read_exact(&mut id_bytes)?;
            let id = String::from_utf8(id_bytes)
                .map_err(|e| Error::Input(format!("sidecar id is not UTF-8: {e}")))?;
            let mut components = vec![0f32; dimension];
            for c in components.iter_mut() {
                r.read_exact(&mut u32buf)?;
                *c = f32::from_le_bytes(u32buf);
            }
            store.insert(id, components)?;
        }
        Ok(store)
    }
}
