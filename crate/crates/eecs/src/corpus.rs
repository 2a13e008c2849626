//! Corpus ingestion and screening.
//!
//! `ingest_corpus` maps CSV/JSONL rows to `Document`s with deterministic ids;
//! `screen_corpus` marks (never deletes) documents that are too short, on the
//! stoplist, or exact normalized duplicates of an earlier document.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenReason {
    TooShort,
    Stoplist,
    Duplicate,
}

/// One raw survey response. `text` is always the unmodified input string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source_row: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<BTreeMap<String, String>>,
    pub screened_out: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_reason: Option<ScreenReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

/// Lowercase, trim, and collapse internal whitespace; the shared
/// normalization for dedup and stoplist checks.
pub fn normalize(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn doc_id(row: u64) -> String {
    format!("doc-{row:05}")
}

/// Read one `Document` per row; no screening applied.
pub fn ingest_corpus(path: &Path, format: InputFormat, text_field: &str) -> Result<Vec<Document>> {
    if text_field.is_empty() {
        return Err(Error::Config("text_field must be non-empty".into()));
    }
    match format {
        InputFormat::Csv => ingest_csv(path, text_field),
        InputFormat::Jsonl => ingest_jsonl(path, text_field),
    }
}

fn ingest_csv(path: &Path, text_field: &str) -> Result<Vec<Document>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: bad header row: {e}", path.display())))?
        .clone();
    let text_idx = headers.iter().position(|h| h == text_field).ok_or_else(|| {
        Error::Input(format!(
            "{}: text_field {text_field:?} not found among columns {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        ))
    })?;

    let mut docs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Input(format!("{}: row {row}: {e}", path.display())))?;
        let text = record
            .get(text_idx)
            .ok_or_else(|| Error::Input(format!("{}: row {row}: missing {text_field:?}", path.display())))?
            .to_string();
        let metadata: BTreeMap<String, String> = headers
            .iter()
            .zip(record.iter())
            .filter(|(h, _)| *h != text_field)
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        docs.push(Document {
            doc_id: doc_id(row as u64),
            text,
            source_row: row as u64,
            metadata: if metadata.is_empty() { None } else { Some(metadata) },
            screened_out: false,
            screen_reason: None,
        });
    }
    Ok(docs)
}

fn ingest_jsonl(path: &Path, text_field: &str) -> Result<Vec<Document>> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut docs = Vec::new();
    let mut row: u64 = 0;
    for line in content.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::Input(format!("{}: row {row}: {e}", path.display())))?;
        let object = value
            .as_object()
            .ok_or_else(|| Error::Input(format!("{}: row {row}: not a JSON object", path.display())))?;
        let text = object
            .get(text_field)
            .and_then(|v| v.as_str())
            .ok_or_else(|| {
                Error::Input(format!(
                    "{}: row {row}: missing string field {text_field:?}",
                    path.display()
                ))
            })?
            .to_string();
        let metadata: BTreeMap<String, String> = object
            .iter()
            .filter(|(k, _)| k.as_str() != text_field)
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect();
        docs.push(Document {
            doc_id: doc_id(row),
            text,
            source_row: row,
            metadata: if metadata.is_empty() { None } else { Some(metadata) },
            screened_out: false,
            screen_reason: None,
        });
        row += 1;
    }
    Ok(docs)
}

/// Mark screened-out documents. Recomputes from scratch, so it is idempotent.
/// Rule precedence per document: too_short, then stoplist, then duplicate.
pub fn screen_corpus(
    docs: &[Document],
    min_chars: usize,
    stoplist: &BTreeSet<String>,
) -> Vec<Document> {
    let mut seen: HashSet<String> = HashSet::new();
    docs.iter()
        .map(|doc| {
            let norm = normalize(&doc.text);
            let reason = if norm.chars().count() < min_chars {
                Some(ScreenReason::TooShort)
            } else if stoplist.contains(&norm) {
                Some(ScreenReason::Stoplist)
            } else if seen.contains(&norm) {
                Some(ScreenReason::Duplicate)
            } else {
                None
            };
            seen.insert(norm);
            Document {
                screened_out: reason.is_some(),
                screen_reason: reason,
                ..doc.clone()
            }
        })
        .collect()
}

/// Default minimum normalized length for a usable response.
pub const DEFAULT_MIN_CHARS: usize = 10;

/// Default stoplist of vacuous responses (already normalized).
pub fn default_stoplist() -> BTreeSet<String> {
    ["none", "n/a", "no comment", "nothing", ""]
        .into_iter()
        .map(String::from)
        .collect()
}
