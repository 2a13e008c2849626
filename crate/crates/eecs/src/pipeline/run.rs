//! Stage orchestration: execute, resume, review, and export runs whose
//! artifacts chain to each other by content hash.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifact::{
    canonical_digest, file_digest, read_stage, sidecar_path, stage_path, write_atomic,
    write_stage, Stage, StageArtifact, SCHEMA_VERSION, ZERO_HASH,
};
use crate::cluster::promote_noise_to_singletons;
use crate::codebook::{
    build_codebook, order_clusters, review_codebook, select_representative, simplify_codebook,
    Cluster, Codebook, CodebookEvent, Representative, ReviewDecision,
};
use crate::corpus::{ingest_corpus, screen_corpus, Document};
use crate::error::{Error, Result};
use crate::extraction::{deidentification_suspects, extract_corpus, ExtractedIdea};
use crate::gateway::{Backend, DemoBackend, Gateway, HttpBackend, MockBackend, MockScript};
use crate::pipeline::config::{BackendKind, PipelineConfig};
use crate::pipeline::manifest::{now_rfc3339, RunManifest, StageRun};
use crate::prompt::PromptSet;
use crate::vector::VectorStore;

pub const CODEBOOK_FILE: &str = "codebook.json";
pub const EXTRACT_REPORT_FILE: &str = "extract_report.json";
const LOCK_FILE: &str = ".lock";

/// One idea's flat-clustering outcome; the cluster stage's record type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub idea_id: String,
    pub cluster_id: i64,
    pub membership_strength: f64,
}

/// The embed stage's record type; vectors live in the binary sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedRecord {
    pub idea_id: String,
}

/// Exclusive-run guard: a lock file removed on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> Result<RunLock> {
        fs::create_dir_all(run_dir)?;
        let path = run_dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut file) => {
                let _ = write!(file, "{}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Input(format!(
                "run directory is locked by another pipeline ({}); remove the file if that run is dead",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Everything a stage needs: validated config, prompts, backends, manifest.
pub struct RunContext {
    pub config: PipelineConfig,
    pub prompts: PromptSet,
    pub gateway: Gateway,
    pub manifest: RunManifest,
}

impl RunContext {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let prompts = match &config.prompt_dir {
            Some(dir) => PromptSet::with_overrides(dir)?,
            None => PromptSet::builtin(),
        };
        let gateway = build_gateway(&config)?;
        let manifest = RunManifest::load_or_new(&config.run_dir, &config, &prompts);
        Ok(RunContext { config, prompts, gateway, manifest })
    }

    /// Every stage header in a run shares the manifest's start timestamp so
    /// resumed or repeated runs rewrite byte-identical artifacts.
    fn created_at(&self) -> String {
        self.manifest.run_started_at.clone()
    }

    fn bindings(&self) -> BTreeMap<String, String> {
        self.config.bindings.to_map()
    }

    fn run_dir(&self) -> PathBuf {
        self.config.run_dir.clone()
    }
}

pub fn build_gateway(config: &PipelineConfig) -> Result<Gateway> {
    let b = &config.backend;
    let (generator, embedder): (Arc<dyn Backend>, Arc<dyn Backend>) = match &b.kind {
        BackendKind::Demo => {
            let demo = Arc::new(DemoBackend::new());
            (demo.clone(), demo)
        }
        BackendKind::Mock { script } => {
            let mock = Arc::new(MockBackend::new(MockScript::load(script)?));
            (mock.clone(), mock)
        }
        BackendKind::Http => (
            Arc::new(HttpBackend::new(b.generation.clone())?),
            Arc::new(HttpBackend::new(b.embedding.clone())?),
        ),
    };
    let mut gateway = Gateway::new(generator, embedder, b.generation.clone(), b.embedding.clone())?
        .with_embed_batch(b.embed_batch)
        .with_cache_bypass(b.bypass_cache);
    if let Some(dir) = &b.cache_dir {
        gateway = gateway.with_cache_dir(dir.clone())?;
    }
    Ok(gateway)
}

fn upstream_digest(run_dir: &Path, stage: Stage) -> Result<String> {
    match stage.upstream() {
        None => Ok(ZERO_HASH.to_string()),
        Some(up) => {
            let path = stage_path(run_dir, up);
            if !path.is_file() {
                return Err(Error::HashChain(format!(
                    "stage {stage}: upstream stage {up} has not been written"
                )));
            }
            file_digest(&path)
        }
    }
}

fn read_header(path: &Path) -> Result<StageArtifact> {
    let file = fs::File::open(path)?;
    let mut line = String::new();
    BufReader::new(file).read_line(&mut line)?;
    serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Input(format!("{}: bad header: {e}", path.display())))
}

/// Cheap resumability check: file present, header sane, chained to the
/// current upstream bytes, sidecar (if any) intact.
fn stage_is_valid(run_dir: &Path, stage: Stage, expected_upstream: &str) -> bool {
    let path = stage_path(run_dir, stage);
    if !path.is_file() {
        return false;
    }
    let Ok(header) = read_header(&path) else { return false };
    if header.schema_version != SCHEMA_VERSION
        || header.stage != stage
        || header.upstream_hash != expected_upstream
    {
        return false;
    }
    if let Some(expected) = &header.sidecar_hash {
        let sc = sidecar_path(run_dir, stage);
        if !sc.is_file() {
            return false;
        }
        match file_digest(&sc) {
            Ok(digest) if &digest == expected => {}
            _ => return false,
        }
    }
    true
}

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Input(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_codebook_json(run_dir: &Path, cb: &Codebook) -> Result<()> {
    write_pretty_json(&run_dir.join(CODEBOOK_FILE), cb)
}

// ---------------------------------------------------------------------------
// stages

fn stage_ingest(ctx: &mut RunContext) -> Result<StageArtifact> {
    let cfg = &ctx.config;
    let docs = ingest_corpus(&cfg.input.path, cfg.input.format, &cfg.input.text_field)?;
    let screened = screen_corpus(&docs, cfg.screening.min_chars, &cfg.screening.stoplist_set());
    let mut artifact =
        StageArtifact::new(Stage::Ingest, ZERO_HASH.into(), ctx.created_at(), screened.len() as u64);
    artifact.params = Some(json!({
        "format": cfg.input.format,
        "text_field": cfg.input.text_field,
        "min_chars": cfg.screening.min_chars,
        "stoplist": cfg.screening.stoplist_set(),
    }));
    write_stage(&cfg.run_dir, &artifact, &screened)?;
    Ok(artifact)
}

fn stage_extract(ctx: &mut RunContext) -> Result<StageArtifact> {
    let run_dir = ctx.run_dir();
    let (_, docs): (_, Vec<Document>) = read_stage(&run_dir, Stage::Ingest)?;
    let upstream = upstream_digest(&run_dir, Stage::Extract)?;
    let (ideas, report) = extract_corpus(&docs, &ctx.bindings(), &ctx.gateway, &ctx.prompts)?;
    if report.docs_processed > 0 && report.ideas_total == 0 {
        return Err(Error::MalformedBudget(format!(
            "extraction produced no usable ideas from {} documents",
            report.docs_processed
        )));
    }
    for idea in deidentification_suspects(&ideas) {
        eprintln!(
            "[eecs] warning: {} may contain an identifying name: {:?}",
            idea.idea_id, idea.text
        );
    }
    write_pretty_json(&run_dir.join(EXTRACT_REPORT_FILE), &report)?;
    let mut artifact =
        StageArtifact::new(Stage::Extract, upstream, ctx.created_at(), ideas.len() as u64);
    artifact.params = Some(json!({
        "generator_model": ctx.gateway.generator_model(),
        "bindings": ctx.config.bindings,
        "report": report,
    }));
    write_stage(&run_dir, &artifact, &ideas)?;
    Ok(artifact)
}

fn stage_embed(ctx: &mut RunContext) -> Result<StageArtifact> {
    let run_dir = ctx.run_dir();
    let (_, ideas): (_, Vec<ExtractedIdea>) = read_stage(&run_dir, Stage::Extract)?;
    let upstream = upstream_digest(&run_dir, Stage::Embed)?;
    let texts: Vec<String> = ideas.iter().map(|i| i.text.clone()).collect();
    let (dimension, vectors) = if texts.is_empty() {
        (1, Vec::new())
    } else {
        let batch = ctx.gateway.embed(&texts)?;
        (batch.dimension, batch.vectors)
    };
    let mut store = VectorStore::new(dimension);
    for (idea, vector) in ideas.iter().zip(vectors) {
        store.insert(&idea.idea_id, vector)?;
    }
    let sidecar = sidecar_path(&run_dir, Stage::Embed);
    store.write_sidecar(&sidecar)?;
    let records: Vec<EmbedRecord> =
        ideas.iter().map(|i| EmbedRecord { idea_id: i.idea_id.clone() }).collect();
    let mut artifact =
        StageArtifact::new(Stage::Embed, upstream, ctx.created_at(), records.len() as u64);
    artifact.sidecar_hash = Some(file_digest(&sidecar)?);
    artifact.params = Some(json!({
        "embedder_model": ctx.gateway.embedder_model(),
        "dimension": dimension,
    }));
    write_stage(&run_dir, &artifact, &records)?;
    Ok(artifact)
}

fn stage_cluster(ctx: &mut RunContext) -> Result<StageArtifact> {
    let run_dir = ctx.run_dir();
    let (_, records): (_, Vec<EmbedRecord>) = read_stage(&run_dir, Stage::Embed)?;
    let upstream = upstream_digest(&run_dir, Stage::Cluster)?;
    let store = VectorStore::read_sidecar(&sidecar_path(&run_dir, Stage::Embed))?;
    let points: Vec<Vec<f32>> = records
        .iter()
        .map(|r| {
            store
                .get(&r.idea_id)
                .map(<[f32]>::to_vec)
                .ok_or_else(|| Error::NotFound(format!("vector for {}", r.idea_id)))
        })
        .collect::<Result<_>>()?;
    let params = ctx.config.clustering.to_params();
    let mut labels = crate::cluster::cluster(&points, &params)?;
    if ctx.config.clustering.promote_noise {
        labels = promote_noise_to_singletons(&labels);
    }
    let rows: Vec<ClusterAssignment> = records
        .iter()
        .zip(labels.labels.iter().zip(&labels.membership_strength))
        .map(|(r, (label, strength))| ClusterAssignment {
            idea_id: r.idea_id.clone(),
            cluster_id: *label,
            membership_strength: *strength,
        })
        .collect();
    let mut artifact =
        StageArtifact::new(Stage::Cluster, upstream, ctx.created_at(), rows.len() as u64);
    artifact.params = Some(
        serde_json::to_value(&ctx.config.clustering).map_err(|e| Error::Input(e.to_string()))?,
    );
    write_stage(&run_dir, &artifact, &rows)?;
    Ok(artifact)
}

fn idea_texts(run_dir: &Path) -> Result<BTreeMap<String, String>> {
    let (_, ideas): (_, Vec<ExtractedIdea>) = read_stage(run_dir, Stage::Extract)?;
    Ok(ideas.into_iter().map(|i| (i.idea_id, i.text)).collect())
}

fn stage_represent(ctx: &mut RunContext) -> Result<StageArtifact> {
    let run_dir = ctx.run_dir();
    let (_, assignments): (_, Vec<ClusterAssignment>) = read_stage(&run_dir, Stage::Cluster)?;
    let upstream = upstream_digest(&run_dir, Stage::Represent)?;
    let texts = idea_texts(&run_dir)?;
    let store = VectorStore::read_sidecar(&sidecar_path(&run_dir, Stage::Embed))?;

    let mut members: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for a in &assignments {
        members.entry(a.cluster_id).or_default().push(a.idea_id.clone());
    }
    let mut clusters: Vec<Cluster> =
        members.into_iter().map(|(id, m)| Cluster::new(id, m)).collect();
    order_clusters(&mut clusters, ctx.config.builder.order);

    let mut selected = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        match select_representative(cluster, &texts, &store, &ctx.gateway) {
            Ok(with_rep) => selected.push(with_rep),
            Err(e) => {
                eprintln!(
                    "[eecs] warning: cluster {} has no representative ({e}); it will be skipped downstream",
                    cluster.cluster_id
                );
                selected.push(cluster.clone());
            }
        }
    }
    ctx.manifest.representative_order = selected.iter().map(|c| c.cluster_id).collect();

    let mut artifact =
        StageArtifact::new(Stage::Represent, upstream, ctx.created_at(), selected.len() as u64);
    artifact.params = Some(
        serde_json::to_value(&ctx.config.builder).map_err(|e| Error::Input(e.to_string()))?,
    );
    write_stage(&run_dir, &artifact, &selected)?;
    Ok(artifact)
}

fn stage_summarize(ctx: &mut RunContext) -> Result<StageArtifact> {
    let run_dir = ctx.run_dir();
    let (_, clusters): (_, Vec<Cluster>) = read_stage(&run_dir, Stage::Represent)?;
    let upstream = upstream_digest(&run_dir, Stage::Summarize)?;
    let texts = idea_texts(&run_dir)?;
    let mut reps = Vec::new();
    for cluster in &clusters {
        let Some(rep_id) = &cluster.representative_id else { continue };
        let text = texts
            .get(rep_id)
            .ok_or_else(|| Error::NotFound(format!("idea text for representative {rep_id}")))?;
        reps.push(Representative {
            cluster_id: cluster.cluster_id,
            idea_id: rep_id.clone(),
            text: text.clone(),
        });
    }
    let cb = build_codebook(&reps, &ctx.config.builder, &ctx.bindings(), &ctx.gateway, &ctx.prompts)?;
    if !cb.entries.is_empty() && cb.active_count() == 0 {
        return Err(Error::MalformedBudget(format!(
            "all {} summarize responses were unusable",
            cb.entries.len()
        )));
    }
    let mut artifact = StageArtifact::new(
        Stage::Summarize,
        upstream,
        ctx.created_at(),
        cb.event_log.len() as u64,
    );
    artifact.params = Some(json!({
        "builder": ctx.config.builder,
        "generator_model": ctx.gateway.generator_model(),
        "embedder_model": ctx.gateway.embedder_model(),
    }));
    write_stage(&run_dir, &artifact, &cb.event_log)?;
    Ok(artifact)
}

fn stage_simplify(ctx: &mut RunContext) -> Result<StageArtifact> {
    let run_dir = ctx.run_dir();
    let (_, events): (_, Vec<CodebookEvent>) = read_stage(&run_dir, Stage::Summarize)?;
    let upstream = upstream_digest(&run_dir, Stage::Simplify)?;
    let cb = Codebook::replay(&events)?;
    let simplified =
        simplify_codebook(cb, &ctx.config.builder, &ctx.bindings(), &ctx.gateway, &ctx.prompts)?;
    write_codebook_json(&run_dir, &simplified)?;
    let mut artifact = StageArtifact::new(
        Stage::Simplify,
        upstream,
        ctx.created_at(),
        simplified.event_log.len() as u64,
    );
    artifact.params = Some(json!({
        "builder": ctx.config.builder,
        "generator_model": ctx.gateway.generator_model(),
    }));
    write_stage(&run_dir, &artifact, &simplified.event_log)?;
    Ok(artifact)
}

// ---------------------------------------------------------------------------
// orchestration

/// Execute one stage (review excluded) and record it in the manifest.
pub fn execute_stage(ctx: &mut RunContext, stage: Stage) -> Result<StageArtifact> {
    let started = now_rfc3339();
    let artifact = match stage {
        Stage::Ingest => stage_ingest(ctx)?,
        Stage::Extract => stage_extract(ctx)?,
        Stage::Embed => stage_embed(ctx)?,
        Stage::Cluster => stage_cluster(ctx)?,
        Stage::Represent => stage_represent(ctx)?,
        Stage::Summarize => stage_summarize(ctx)?,
        Stage::Simplify => stage_simplify(ctx)?,
        Stage::Review => {
            return Err(Error::Input("the review stage runs via the review command".into()))
        }
    };
    let path = stage_path(&ctx.config.run_dir, stage);
    let run = StageRun {
        digest: file_digest(&path)?,
        canonical_digest: canonical_digest(&path)?,
        started_at: started,
        finished_at: now_rfc3339(),
        record_count: artifact.record_count,
    };
    eprintln!("[eecs] {stage}: {} records", artifact.record_count);
    ctx.manifest.record_stage(stage, run);
    ctx.manifest.save(&ctx.config.run_dir)?;
    Ok(artifact)
}

/// Verify that every stage before `stage` is present and chained.
fn verify_chain_before(run_dir: &Path, stage: Stage) -> Result<()> {
    let mut prev = ZERO_HASH.to_string();
    for s in Stage::PIPELINE {
        if s == stage {
            return Ok(());
        }
        let path = stage_path(run_dir, s);
        if !path.is_file() {
            return Err(Error::HashChain(format!(
                "stage {stage} needs upstream stage {s}, which has not been written"
            )));
        }
        let header = read_header(&path)?;
        if header.upstream_hash != prev {
            return Err(Error::HashChain(format!(
                "upstream stage {s} is stale; re-run it (or resume) first"
            )));
        }
        prev = file_digest(&path)?;
    }
    Ok(())
}

/// Run exactly one stage after checking its upstream chain.
pub fn run_stage(config: PipelineConfig, stage: Stage) -> Result<StageArtifact> {
    let mut ctx = RunContext::new(config)?;
    let _lock = RunLock::acquire(&ctx.config.run_dir)?;
    verify_chain_before(&ctx.config.run_dir, stage)?;
    execute_stage(&mut ctx, stage)
}

/// Run every stage in order, stopping at the first error.
pub fn run_all(config: PipelineConfig) -> Result<RunManifest> {
    let mut ctx = RunContext::new(config)?;
    let _lock = RunLock::acquire(&ctx.config.run_dir)?;
    for stage in Stage::PIPELINE {
        execute_stage(&mut ctx, stage)?;
    }
    Ok(ctx.manifest)
}

/// Re-run only the stages whose artifacts are missing or no longer chain.
pub fn resume(config: PipelineConfig) -> Result<RunManifest> {
    let mut ctx = RunContext::new(config)?;
    let _lock = RunLock::acquire(&ctx.config.run_dir)?;
    let mut prev = ZERO_HASH.to_string();
    for stage in Stage::PIPELINE {
        let run_dir = ctx.config.run_dir.clone();
        if stage_is_valid(&run_dir, stage, &prev) {
            let path = stage_path(&run_dir, stage);
            let header = read_header(&path)?;
            let (started_at, finished_at) = ctx
                .manifest
                .stages
                .get(stage.as_str())
                .map(|s| (s.started_at.clone(), s.finished_at.clone()))
                .unwrap_or_else(|| (header.created_at.clone(), header.created_at.clone()));
            ctx.manifest.record_stage(
                stage,
                StageRun {
                    digest: file_digest(&path)?,
                    canonical_digest: canonical_digest(&path)?,
                    started_at,
                    finished_at,
                    record_count: header.record_count,
                },
            );
            eprintln!("[eecs] {stage}: up to date ({} records)", header.record_count);
        } else {
            execute_stage(&mut ctx, stage)?;
        }
        prev = file_digest(&stage_path(&ctx.config.run_dir, stage))?;
    }
    ctx.manifest.save(&ctx.config.run_dir)?;
    Ok(ctx.manifest)
}

// ---------------------------------------------------------------------------
// review & export

/// The current codebook: the review stage's state when present, else the
/// simplify stage's.
pub fn latest_codebook(run_dir: &Path) -> Result<Codebook> {
    let events = match read_stage::<CodebookEvent>(run_dir, Stage::Review) {
        Ok((_, events)) => events,
        Err(Error::NotFound(_)) => read_stage::<CodebookEvent>(run_dir, Stage::Simplify)?.1,
        Err(e) => return Err(e),
    };
    Codebook::replay(&events)
}

/// Apply human review decisions on top of the latest codebook and write the
/// review stage.
pub fn run_review(run_dir: &Path, decisions: &[ReviewDecision]) -> Result<StageArtifact> {
    let _lock = RunLock::acquire(run_dir)?;
    let cb = latest_codebook(run_dir)?;
    let reviewed = review_codebook(cb, decisions)?;
    let upstream = upstream_digest(run_dir, Stage::Review)?;
    let manifest = RunManifest::load(run_dir)?;
    let created_at = manifest
        .as_ref()
        .map(|m| m.run_started_at.clone())
        .unwrap_or_else(now_rfc3339);
    let artifact = StageArtifact::new(
        Stage::Review,
        upstream,
        created_at,
        reviewed.event_log.len() as u64,
    );
    let started = now_rfc3339();
    write_stage(run_dir, &artifact, &reviewed.event_log)?;
    write_codebook_json(run_dir, &reviewed)?;
    if let Some(mut manifest) = manifest {
        let path = stage_path(run_dir, Stage::Review);
        manifest.record_stage(
            Stage::Review,
            StageRun {
                digest: file_digest(&path)?,
                canonical_digest: canonical_digest(&path)?,
                started_at: started,
                finished_at: now_rfc3339(),
                record_count: artifact.record_count,
            },
        );
        manifest.save(run_dir)?;
    }
    Ok(artifact)
}

/// Read review decisions from a JSONL file (one decision per line).
pub fn read_decisions(path: &Path) -> Result<Vec<ReviewDecision>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut decisions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: ReviewDecision = serde_json::from_str(line)
            .map_err(|e| Error::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        decisions.push(d);
    }
    Ok(decisions)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Markdown,
    Csv,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "markdown" | "md" => Ok(ExportFormat::Markdown),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::Config(format!(
                "unknown export format '{other}' (expected json, markdown, or csv)"
            ))),
        }
    }
}

fn markdown_cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

fn markdown_bytes(cb: &Codebook) -> Vec<u8> {
    let mut out = String::from("| label | definition | example | status |\n| --- | --- | --- | --- |\n");
    for e in cb.active() {
        out.push_str(&format!(
            "| {} | {} | {} | active |\n",
            markdown_cell(&e.label),
            markdown_cell(&e.definition),
            markdown_cell(&e.example),
        ));
    }
    out.into_bytes()
}

fn csv_bytes(cb: &Codebook) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["entry_id", "label", "definition", "example", "status"])
        .map_err(|e| Error::Input(e.to_string()))?;
    for e in cb.active() {
        writer
            .write_record([&e.entry_id, &e.label, &e.definition, &e.example, &"active".to_string()])
            .map_err(|e| Error::Input(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| Error::Input(e.to_string()))
}

/// Render the active codebook to `<run_dir>/export.<ext>`.
pub fn export(run_dir: &Path, format: ExportFormat) -> Result<PathBuf> {
    let cb = latest_codebook(run_dir)?;
    let (name, bytes) = match format {
        ExportFormat::Json => {
            let mut b = serde_json::to_vec_pretty(&cb).map_err(|e| Error::Input(e.to_string()))?;
            b.push(b'\n');
            ("export.json", b)
        }
        ExportFormat::Markdown => ("export.md", markdown_bytes(&cb)),
        ExportFormat::Csv => ("export.csv", csv_bytes(&cb)?),
    };
    let path = run_dir.join(name);
    write_atomic(&path, &bytes)?;
    Ok(path)
}
