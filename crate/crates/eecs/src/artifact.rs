//! Content-addressed stage artifacts.
//!
//! Every stage writes `<run_dir>/<stage>.jsonl`: a one-line JSON header (the
//! `StageArtifact`) followed by one JSON record per line. Each header carries
//! the sha256 of the upstream stage's file, so any staleness is detected on
//! read and a run can be resumed safely.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Upstream hash of the first stage.
pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// Placeholder timestamp used when computing timestamp-free digests.
const CANONICAL_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Extract,
    Embed,
    Cluster,
    Represent,
    Summarize,
    Simplify,
    Review,
}

impl Stage {
    /// Pipeline stages in execution order (review is on-demand, not part of a run).
    pub const PIPELINE: [Stage; 7] = [
        Stage::Ingest,
        Stage::Extract,
        Stage::Embed,
        Stage::Cluster,
        Stage::Represent,
        Stage::Summarize,
        Stage::Simplify,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Represent => "represent",
            Stage::Summarize => "summarize",
            Stage::Simplify => "simplify",
            Stage::Review => "review",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        match s {
            "ingest" => Some(Stage::Ingest),
            "extract" => Some(Stage::Extract),
            "embed" => Some(Stage::Embed),
            "cluster" => Some(Stage::Cluster),
            "represent" => Some(Stage::Represent),
            "summarize" => Some(Stage::Summarize),
            "simplify" => Some(Stage::Simplify),
            "review" => Some(Stage::Review),
            _ => None,
        }
    }

    pub fn upstream(&self) -> Option<Stage> {
        match self {
            Stage::Ingest => None,
            Stage::Extract => Some(Stage::Ingest),
            Stage::Embed => Some(Stage::Extract),
            Stage::Cluster => Some(Stage::Embed),
            Stage::Represent => Some(Stage::Cluster),
            Stage::Summarize => Some(Stage::Represent),
            Stage::Simplify => Some(Stage::Summarize),
            Stage::Review => Some(Stage::Simplify),
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Header line of a stage file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageArtifact {
    pub stage: Stage,
    pub schema_version: u32,
    pub upstream_hash: String,
    pub created_at: String,
    pub record_count: u64,
    /// Stage parameters echoed for auditability (e.g. clustering knobs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    /// Digest of a binary sidecar file, when the stage has one (embed).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar_hash: Option<String>,
}

impl StageArtifact {
    pub fn new(stage: Stage, upstream_hash: String, created_at: String, record_count: u64) -> Self {
        StageArtifact {
            stage,
            schema_version: SCHEMA_VERSION,
            upstream_hash,
            created_at,
            record_count,
            params: None,
            sidecar_hash: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn stage_path(run_dir: &Path, stage: Stage) -> PathBuf {
    run_dir.join(format!("{stage}.jsonl"))
}

pub fn sidecar_path(run_dir: &Path, stage: Stage) -> PathBuf {
    run_dir.join(format!("{stage}.vectors.bin"))
}

/// Write bytes to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| Error::Input(format!("{} has no parent", path.display())))?;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("stage"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize header + records and write the stage file atomically.
pub fn write_stage<T: Serialize>(
    run_dir: &Path,
    artifact: &StageArtifact,
    records: &[T],
) -> Result<PathBuf> {
    debug_assert_eq!(artifact.record_count, records.len() as u64);
    let mut out = serde_json::to_vec(artifact).map_err(|e| Error::Input(e.to_string()))?;
    out.push(b'\n');
    for record in records {
        out.extend(serde_json::to_vec(record).map_err(|e| Error::Input(e.to_string()))?);
        out.push(b'\n');
    }
    let path = stage_path(run_dir, artifact.stage);
    write_atomic(&path, &out)?;
    Ok(path)
}

/// Read a stage file, verifying schema version, record count, the upstream
/// hash chain, and any sidecar digest.
pub fn read_stage<T: DeserializeOwned>(run_dir: &Path, stage: Stage) -> Result<(StageArtifact, Vec<T>)> {
    let path = stage_path(run_dir, stage);
    if !path.is_file() {
        return Err(Error::NotFound(format!("stage {stage} has not been written ({})", path.display())));
    }
    let reader = BufReader::new(fs::File::open(&path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Input(format!("stage {stage}: empty artifact file")))??;
    let artifact: StageArtifact = serde_json::from_str(&header_line)
        .map_err(|e| Error::Input(format!("stage {stage}: bad header: {e}")))?;
    if artifact.schema_version != SCHEMA_VERSION {
        return Err(Error::Input(format!(
            "stage {stage}: unknown schema_version {} (expected {SCHEMA_VERSION})",
            artifact.schema_version
        )));
    }
    if artifact.stage != stage {
        return Err(Error::Input(format!(
            "stage {stage}: header names stage {}",
            artifact.stage
        )));
    }

    match stage.upstream() {
        None => {
            if artifact.upstream_hash != ZERO_HASH {
                return Err(Error::HashChain(format!(
                    "stage {stage}: expected all-zero upstream hash"
                )));
            }
        }
        Some(upstream) => {
            let upstream_path = stage_path(run_dir, upstream);
            if !upstream_path.is_file() {
                return Err(Error::HashChain(format!(
                    "stage {stage}: upstream stage {upstream} file is missing"
                )));
            }
            let digest = file_digest(&upstream_path)?;
            if digest != artifact.upstream_hash {
                return Err(Error::HashChain(format!(
                    "stage {stage}: upstream stage {upstream} is stale (expected {}, found {digest})",
                    artifact.upstream_hash
                )));
            }
        }
    }

    if let Some(expected) = &artifact.sidecar_hash {
        let sc = sidecar_path(run_dir, stage);
        if !sc.is_file() {
            return Err(Error::HashChain(format!("stage {stage}: sidecar file is missing")));
        }
        let digest = file_digest(&sc)?;
        if &digest != expected {
            return Err(Error::HashChain(format!(
                "stage {stage}: sidecar is stale (expected {expected}, found {digest})"
            )));
        }
    }

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("stage {stage}: bad record on line {}: {e}", i + 2)))?;
        records.push(record);
    }
    if records.len() as u64 != artifact.record_count {
        return Err(Error::Input(format!(
            "stage {stage}: header says {} records, file has {}",
            artifact.record_count,
            records.len()
        )));
    }
    Ok((artifact, records))
}

/// Digest of a stage file with the header timestamp and upstream hash
/// normalized, so content comparisons across runs ignore wall-clock
/// differences (the raw upstream digest transitively embeds the upstream
/// header's timestamp).
pub fn canonical_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Input(format!("{}: no header line", path.display())))?;
    let mut header: StageArtifact = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Input(format!("{}: bad header: {e}", path.display())))?;
    header.created_at = CANONICAL_TIMESTAMP.to_string();
    header.upstream_hash = ZERO_HASH.to_string();
    let mut canon = serde_json::to_vec(&header).map_err(|e| Error::Input(e.to_string()))?;
    canon.extend_from_slice(&bytes[newline..]);
    Ok(sha256_hex(&canon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Rec {
        id: u32,
        text: String,
    }

    fn recs() -> Vec<Rec> {
        vec![Rec { id: 0, text: "a".into() }, Rec { id: 1, text: "b".into() }]
    }

    fn ts() -> String {
        "2024-06-01T00:00:00Z".to_string()
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), ts(), 2);
        write_stage(dir.path(), &artifact, &recs()).unwrap();
        let (read_artifact, read_recs): (_, Vec<Rec>) = read_stage(dir.path(), Stage::Ingest).unwrap();
        assert_eq!(read_artifact, artifact);
        assert_eq!(read_recs, recs());
    }

    #[test]
    fn chained_stage_verifies_upstream_digest() {
        let dir = tempfile::tempdir().unwrap();
        let ingest = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), ts(), 2);
        let ingest_path = write_stage(dir.path(), &ingest, &recs()).unwrap();
        let upstream = file_digest(&ingest_path).unwrap();
        let extract = StageArtifact::new(Stage::Extract, upstream, ts(), 2);
        write_stage(dir.path(), &extract, &recs()).unwrap();
        assert!(read_stage::<Rec>(dir.path(), Stage::Extract).is_ok());

        // tamper with the upstream file: the chain must break
        std::fs::write(&ingest_path, b"{}\n").unwrap();
        let err = read_stage::<Rec>(dir.path(), Stage::Extract).unwrap_err();
        assert!(matches!(err, Error::HashChain(_)), "{err}");
    }

    #[test]
    fn missing_stage_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_stage::<Rec>(dir.path(), Stage::Cluster).unwrap_err();
        assert!(matches!(err, Error::NotFound(_)), "{err}");
    }

    #[test]
    fn unknown_schema_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut artifact = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), ts(), 0);
        artifact.schema_version = 99;
        write_stage::<Rec>(dir.path(), &artifact, &[]).unwrap();
        let err = read_stage::<Rec>(dir.path(), Stage::Ingest).unwrap_err();
        assert!(err.to_string().contains("schema_version"), "{err}");
    }

    #[test]
    fn record_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let artifact = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), ts(), 3);
        let path = stage_path(dir.path(), Stage::Ingest);
        let mut bytes = serde_json::to_vec(&artifact).unwrap();
        bytes.push(b'\n');
        bytes.extend(serde_json::to_vec(&recs()[0]).unwrap());
        bytes.push(b'\n');
        write_atomic(&path, &bytes).unwrap();
        let err = read_stage::<Rec>(dir.path(), Stage::Ingest).unwrap_err();
        assert!(err.to_string().contains("records"), "{err}");
    }

    #[test]
    fn canonical_digest_ignores_timestamp_and_chain_but_not_content() {
        let dir = tempfile::tempdir().unwrap();
        let a1 = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), "2024-01-01T00:00:00Z".into(), 2);
        let p1 = write_stage(dir.path(), &a1, &recs()).unwrap();
        let d1 = (file_digest(&p1).unwrap(), canonical_digest(&p1).unwrap());

        let a2 = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), "2025-12-31T23:59:59Z".into(), 2);
        let p2 = write_stage(dir.path(), &a2, &recs()).unwrap();
        let d2 = (file_digest(&p2).unwrap(), canonical_digest(&p2).unwrap());

        assert_ne!(d1.0, d2.0, "raw digests must see the timestamp");
        assert_eq!(d1.1, d2.1, "canonical digests must not");

        // two runs chain to upstream files written at different times; the
        // canonical digest compares content past that difference
        let up = "9".repeat(64);
        let a3 = StageArtifact::new(Stage::Extract, up, "2024-01-01T00:00:00Z".into(), 2);
        let bytes = {
            let mut b = serde_json::to_vec(&a3).unwrap();
            b.push(b'\n');
            for r in recs() {
                b.extend(serde_json::to_vec(&r).unwrap());
                b.push(b'\n');
            }
            b
        };
        let p3 = dir.path().join("other.jsonl");
        write_atomic(&p3, &bytes).unwrap();
        let a4 = StageArtifact::new(Stage::Extract, ZERO_HASH.into(), "2024-01-01T00:00:00Z".into(), 2);
        let p4 = write_stage(dir.path(), &a4, &recs()).unwrap();
        assert_eq!(canonical_digest(&p3).unwrap(), canonical_digest(&p4).unwrap());

        // record content still matters
        let a5 = StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), "2024-01-01T00:00:00Z".into(), 1);
        let p5 = write_stage(dir.path(), &a5, &recs()[..1]).unwrap();
        assert_ne!(canonical_digest(&p5).unwrap(), d1.1);
    }
}
