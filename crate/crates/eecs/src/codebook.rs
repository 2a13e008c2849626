//! Codebook construction: representative selection, the sequential
//! retrieval-augmented summarization loop, two-step simplification, and
//! human review. All mutations flow through an append-only event log that
//! replays to the exact same state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gateway::{Gateway, GenerationRequest};
use crate::prompt::{
    parse_code_proposal, parse_simplification, parse_verdict, ParsedCodeProposal, PromptSet,
    SimplifyDecision, TemplateName, VerdictDecision,
};
use crate::vector::cosine;

/// Re-generations attempted after a malformed response before flagging.
pub const MALFORMED_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: i64,
    pub member_ids: Vec<String>,
    pub representative_id: Option<String>,
}

impl Cluster {
    pub fn new(cluster_id: i64, member_ids: Vec<String>) -> Self {
        Cluster { cluster_id, member_ids, representative_id: None }
    }
}

/// One cluster's chosen spokesman, in the order the summarize loop will
/// consume them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representative {
    pub cluster_id: i64,
    pub idea_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Active,
    Discarded,
    SplitParent,
    ReviewFlagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Source cluster, when the entry came from a representative.
    pub cluster_id: Option<i64>,
    /// Which pass created the entry: "summarize", "simplify", or "review".
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaced_by: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub entry_id: String,
    pub label: String,
    pub definition: String,
    pub example: String,
    pub status: EntryStatus,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOp {
    /// `data.entry` holds the full entry; replay re-inserts it verbatim.
    Append,
    /// A representative matched an existing code; no state change.
    Reuse,
    Discard,
    /// `data.replaced_by` lists the successor entry ids.
    Split,
    Flag,
    Accept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookEvent {
    pub op: EventOp,
    pub entry_id: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Codebook {
    pub entries: Vec<CodebookEntry>,
    pub version: u64,
    pub event_log: Vec<CodebookEvent>,
}

impl Codebook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self) -> impl Iterator<Item = &CodebookEntry> {
        self.entries.iter().filter(|e| e.status == EntryStatus::Active)
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    pub fn entry(&self, entry_id: &str) -> Option<&CodebookEntry> {
        self.entries.iter().find(|e| e.entry_id == entry_id)
    }

    /// Case-insensitive label lookup among active entries.
    pub fn find_active_label(&self, label: &str) -> Option<&CodebookEntry> {
        let needle = label.to_lowercase();
        self.active().find(|e| e.label.to_lowercase() == needle)
    }

    fn next_entry_id(&self) -> String {
        format!("code-{:03}", self.entries.len() + 1)
    }

    /// Append the event to the log and apply its state change.
    fn record(&mut self, event: CodebookEvent) -> Result<()> {
        Self::apply(&mut self.entries, &event)?;
        self.event_log.push(event);
        self.version = self.event_log.len() as u64;
        Ok(())
    }

    fn apply(entries: &mut Vec<CodebookEntry>, event: &CodebookEvent) -> Result<()> {
        let missing = || Error::NotFound(format!("codebook entry {}", event.entry_id));
        match event.op {
            EventOp::Append => {
                let payload = event
                    .data
                    .as_ref()
                    .and_then(|d| d.get("entry"))
                    .ok_or_else(|| Error::Input("append event lacks an entry payload".into()))?;
                let entry: CodebookEntry = serde_json::from_value(payload.clone())
                    .map_err(|e| Error::Input(format!("append event entry payload: {e}")))?;
                entries.push(entry);
            }
            EventOp::Reuse => {}
            EventOp::Discard => {
                let entry =
                    entries.iter_mut().find(|e| e.entry_id == event.entry_id).ok_or_else(missing)?;
                entry.status = EntryStatus::Discarded;
            }
            EventOp::Split => {
                let replaced: Vec<String> = event
                    .data
                    .as_ref()
                    .and_then(|d| d.get("replaced_by"))
                    .and_then(|v| serde_json::from_value(v.clone()).ok())
                    .ok_or_else(|| Error::Input("split event lacks replaced_by".into()))?;
                let entry =
                    entries.iter_mut().find(|e| e.entry_id == event.entry_id).ok_or_else(missing)?;
                entry.status = EntryStatus::SplitParent;
                entry.provenance.replaced_by = Some(replaced);
            }
            EventOp::Flag => {
                let entry =
                    entries.iter_mut().find(|e| e.entry_id == event.entry_id).ok_or_else(missing)?;
                entry.status = EntryStatus::ReviewFlagged;
            }
            EventOp::Accept => {
                let entry =
                    entries.iter_mut().find(|e| e.entry_id == event.entry_id).ok_or_else(missing)?;
                entry.status = EntryStatus::Active;
            }
        }
        Ok(())
    }

    /// Rebuild a codebook from scratch by applying each logged event.
    pub fn replay(event_log: &[CodebookEvent]) -> Result<Codebook> {
        let mut cb = Codebook::new();
        for event in event_log {
            cb.record(event.clone())?;
        }
        Ok(cb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildOrder {
    ClusterSizeDesc,
    ClusterIdAsc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuilderParams {
    /// Bootstrap length and retrieval width share one knob.
    pub k: usize,
    pub order: BuildOrder,
}

impl Default for BuilderParams {
    fn default() -> Self {
        BuilderParams { k: 5, order: BuildOrder::ClusterSizeDesc }
    }
}

impl BuilderParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("builder k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sort clusters into the order the summarize loop will visit them.
pub fn order_clusters(clusters: &mut [Cluster], order: BuildOrder) {
    match order {
        BuildOrder::ClusterSizeDesc => clusters
            .sort_by(|a, b| b.member_ids.len().cmp(&a.member_ids.len()).then(a.cluster_id.cmp(&b.cluster_id))),
        BuildOrder::ClusterIdAsc => clusters.sort_by_key(|c| c.cluster_id),
    }
}

/// Pick the member whose embedding is most similar to the embedding of the
/// cluster's concatenated member texts. Ties go to the earliest member.
pub fn select_representative(
    cluster: &Cluster,
    idea_texts: &BTreeMap<String, String>,
    idea_vectors: &crate::vector::VectorStore,
    gateway: &Gateway,
) -> Result<Cluster> {
    if cluster.member_ids.is_empty() {
        return Err(Error::Input(format!("cluster {} has no members", cluster.cluster_id)));
    }
    let mut out = cluster.clone();
    if cluster.member_ids.len() == 1 {
        out.representative_id = Some(cluster.member_ids[0].clone());
        return Ok(out);
    }
    let mut joined = String::new();
    for id in &cluster.member_ids {
        let text = idea_texts
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("idea text for {id}")))?;
        if !joined.is_empty() {
            joined.push(' ');
        }
        joined.push_str(text);
    }
    let query = gateway.embed_one(&joined)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, id) in cluster.member_ids.iter().enumerate() {
        let vec = idea_vectors
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("idea vector for {id}")))?;
        let sim = cosine(&query, vec)?;
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((i, sim));
        }
    }
    let (winner, _) = best.expect("non-empty cluster");
    out.representative_id = Some(cluster.member_ids[winner].clone());
    Ok(out)
}

/// The `{codes}` placeholder value: a bracketed, single-quoted label list.
pub fn format_codes(labels: &[&str]) -> String {
    let quoted: Vec<String> = labels.iter().map(|l| format!("'{l}'")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Text embedded to stand for a code during retrieval.
fn code_embedding_text(entry: &CodebookEntry) -> String {
    format!("{}: {}", entry.label, entry.definition)
}

/// Lazily embedded per-entry code vectors, keyed by entry id.
struct CodeVectors {
    vectors: BTreeMap<String, Vec<f32>>,
}

impl CodeVectors {
    fn new() -> Self {
        CodeVectors { vectors: BTreeMap::new() }
    }

    fn get(&mut self, entry: &CodebookEntry, gateway: &Gateway) -> Result<&[f32]> {
        if !self.vectors.contains_key(&entry.entry_id) {
            let v = gateway.embed_one(&code_embedding_text(entry))?;
            self.vectors.insert(entry.entry_id.clone(), v);
        }
        Ok(self.vectors.get(&entry.entry_id).expect("just inserted"))
    }
}

/// The k active entries most similar to `query`, ties broken by insertion
/// order; `skip` excludes one entry id (the entry being judged).
fn top_k_codes<'a>(
    cb: &'a Codebook,
    query: &[f32],
    k: usize,
    skip: Option<&str>,
    vectors: &mut CodeVectors,
    gateway: &Gateway,
) -> Result<Vec<&'a CodebookEntry>> {
    let mut scored: Vec<(usize, f64, &CodebookEntry)> = Vec::new();
    for (i, entry) in cb.active().enumerate() {
        if skip == Some(entry.entry_id.as_str()) {
            continue;
        }
        let sim = cosine(query, vectors.get(entry, gateway)?)?;
        scored.push((i, sim, entry));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(_, _, e)| e).collect())
}

/// Generate, then parse with `parse` and fall back to `fallback`; retries
/// with fresh generations while both parsers fail. Returns the outcome plus
/// the final raw response text.
fn generate_parsed<T>(
    gateway: &Gateway,
    req: &GenerationRequest,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<(Option<T>, String)> {
    let mut response = gateway.generate(req)?;
    let mut attempts = 0;
    loop {
        if let Some(parsed) = parse(&response.text) {
            return Ok((Some(parsed), response.text));
        }
        if attempts >= MALFORMED_RETRIES {
            return Ok((None, response.text));
        }
        attempts += 1;
        response = gateway.generate_fresh(req)?;
    }
}

/// Outcome of one summarize exchange, after proposal/verdict fallback.
enum SummarizeOutcome {
    Proposal(ParsedCodeProposal),
    VerdictKeep(String, String),
    VerdictReject(String),
}

fn parse_summarize(text: &str) -> Option<SummarizeOutcome> {
    if let Ok(p) = parse_code_proposal(text) {
        return Some(SummarizeOutcome::Proposal(p));
    }
    match parse_verdict(text) {
        Ok(v) => match v.decision {
            VerdictDecision::Keep => Some(SummarizeOutcome::VerdictKeep(v.code, v.reasoning)),
            VerdictDecision::Reject => Some(SummarizeOutcome::VerdictReject(v.code)),
        },
        Err(_) => None,
    }
}

/// Grow a codebook from ordered cluster representatives: the first k run
/// bare (bootstrap), the rest see the top-k most similar existing codes and
/// may reuse instead of append.
pub fn build_codebook(
    representatives: &[Representative],
    params: &BuilderParams,
    bindings: &BTreeMap<String, String>,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Codebook> {
    params.validate()?;
    let mut cb = Codebook::new();
    let mut vectors = CodeVectors::new();

    for (step, rep) in representatives.iter().enumerate() {
        let bootstrap = step < params.k;
        let mut b = bindings.clone();
        b.insert("text".into(), rep.text.clone());
        let template = if bootstrap {
            TemplateName::SummarizeBootstrap
        } else {
            let query = gateway.embed_one(&rep.text)?;
            let top = top_k_codes(&cb, &query, params.k, None, &mut vectors, gateway)?;
            let labels: Vec<&str> = top.iter().map(|e| e.label.as_str()).collect();
            b.insert("codes".into(), format_codes(&labels));
            TemplateName::SummarizeCluster
        };
        let req = GenerationRequest::new(prompts.render_filtered(template, &b)?);
        let digest = req.prompt_digest();
        let (outcome, raw) = generate_parsed(gateway, &req, parse_summarize)?;

        match outcome {
            Some(SummarizeOutcome::Proposal(p)) if p.is_new => {
                match cb.find_active_label(&p.label) {
                    // A "new" label colliding with an active one is a reuse:
                    // active labels stay unique.
                    Some(existing) => {
                        let entry_id = existing.entry_id.clone();
                        record_reuse(&mut cb, &entry_id, rep, &p.label, &digest)?;
                    }
                    None => {
                        let entry = CodebookEntry {
                            entry_id: cb.next_entry_id(),
                            label: p.label,
                            definition: p.definition,
                            example: p.example,
                            status: EntryStatus::Active,
                            provenance: Provenance {
                                cluster_id: Some(rep.cluster_id),
                                stage: "summarize".into(),
                                replaced_by: None,
                            },
                        };
                        record_append(&mut cb, entry, rep.cluster_id, &digest, "proposed for cluster representative")?;
                    }
                }
            }
            Some(SummarizeOutcome::Proposal(p)) => {
                let entry_id = cb.find_active_label(&p.label).map(|e| e.entry_id.clone());
                record_reuse(&mut cb, entry_id.as_deref().unwrap_or(""), rep, &p.label, &digest)?;
            }
            Some(SummarizeOutcome::VerdictKeep(code, reasoning)) => {
                match cb.find_active_label(&code) {
                    Some(existing) => {
                        let entry_id = existing.entry_id.clone();
                        record_reuse(&mut cb, &entry_id, rep, &code, &digest)?;
                    }
                    None => {
                        let entry = CodebookEntry {
                            entry_id: cb.next_entry_id(),
                            label: code,
                            definition: reasoning,
                            example: rep.text.clone(),
                            status: EntryStatus::Active,
                            provenance: Provenance {
                                cluster_id: Some(rep.cluster_id),
                                stage: "summarize".into(),
                                replaced_by: None,
                            },
                        };
                        record_append(&mut cb, entry, rep.cluster_id, &digest, "kept by verdict-form response")?;
                    }
                }
            }
            Some(SummarizeOutcome::VerdictReject(code)) => {
                let entry_id = cb.find_active_label(&code).map(|e| e.entry_id.clone());
                record_reuse(&mut cb, entry_id.as_deref().unwrap_or(""), rep, &code, &digest)?;
            }
            None => {
                // Unusable after retries: park the raw text for human review.
                let entry = CodebookEntry {
                    entry_id: cb.next_entry_id(),
                    label: format!("Unparsed cluster {}", rep.cluster_id),
                    definition: raw,
                    example: rep.text.clone(),
                    status: EntryStatus::ReviewFlagged,
                    provenance: Provenance {
                        cluster_id: Some(rep.cluster_id),
                        stage: "summarize".into(),
                        replaced_by: None,
                    },
                };
                record_append(&mut cb, entry, rep.cluster_id, &digest, "response was unparseable after retries")?;
            }
        }
    }
    Ok(cb)
}

fn record_append(
    cb: &mut Codebook,
    entry: CodebookEntry,
    cluster_id: i64,
    prompt_digest: &str,
    reason: &str,
) -> Result<()> {
    let event = CodebookEvent {
        op: EventOp::Append,
        entry_id: entry.entry_id.clone(),
        reason: reason.into(),
        data: Some(json!({
            "entry": entry,
            "cluster_id": cluster_id,
            "prompt_digest": prompt_digest,
        })),
    };
    cb.record(event)
}

fn record_reuse(
    cb: &mut Codebook,
    entry_id: &str,
    rep: &Representative,
    label: &str,
    prompt_digest: &str,
) -> Result<()> {
    let event = CodebookEvent {
        op: EventOp::Reuse,
        entry_id: entry_id.into(),
        reason: format!("cluster {} representative covered by '{label}'", rep.cluster_id),
        data: Some(json!({
            "cluster_id": rep.cluster_id,
            "idea_id": rep.idea_id,
            "label": label,
            "prompt_digest": prompt_digest,
        })),
    };
    cb.record(event)
}

/// Outcome of one redundancy-pass exchange, after verdict/proposal fallback.
enum RedundancyOutcome {
    Keep,
    Reject(String),
}

fn parse_redundancy(text: &str) -> Option<RedundancyOutcome> {
    if let Ok(v) = parse_verdict(text) {
        return Some(match v.decision {
            VerdictDecision::Keep => RedundancyOutcome::Keep,
            VerdictDecision::Reject => RedundancyOutcome::Reject(v.reasoning),
        });
    }
    match parse_code_proposal(text) {
        // A reuse-shaped answer means an existing code suffices; a fresh
        // triplet means the judged code stands on its own.
        Ok(p) if !p.is_new => Some(RedundancyOutcome::Reject(format!("covered by '{}'", p.label))),
        Ok(_) => Some(RedundancyOutcome::Keep),
        Err(_) => None,
    }
}

enum ClarityOutcome {
    Keep,
    Split(Vec<(String, String)>),
    NeedsReview(String),
}

fn parse_clarity(text: &str) -> Option<ClarityOutcome> {
    match parse_simplification(text) {
        Ok(s) if s.decision == SimplifyDecision::Keep => Some(ClarityOutcome::Keep),
        Ok(s) if s.needs_review => Some(ClarityOutcome::NeedsReview(s.reasoning)),
        Ok(s) => Some(ClarityOutcome::Split(s.alternates)),
        Err(_) => None,
    }
}

/// Two-pass simplification: discard redundant codes, then split vague ones.
pub fn simplify_codebook(
    mut cb: Codebook,
    params: &BuilderParams,
    bindings: &BTreeMap<String, String>,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Codebook> {
    params.validate()?;
    let mut vectors = CodeVectors::new();

    // Step 1: redundancy. Judge each active entry against its k nearest
    // peers; rejections take effect immediately.
    let pass_ids: Vec<String> = cb.active().map(|e| e.entry_id.clone()).collect();
    for entry_id in &pass_ids {
        let Some(entry) = cb.entry(entry_id) else { continue };
        if entry.status != EntryStatus::Active {
            continue;
        }
        let label = entry.label.clone();
        let query = gateway.embed_one(&code_embedding_text(entry))?;
        let top = top_k_codes(&cb, &query, params.k, Some(entry_id.as_str()), &mut vectors, gateway)?;
        let labels: Vec<&str> = top.iter().map(|e| e.label.as_str()).collect();
        let mut b = bindings.clone();
        b.insert("text".into(), label.clone());
        b.insert("codes".into(), format_codes(&labels));
        let req = GenerationRequest::new(prompts.render_filtered(TemplateName::EditCodebook, &b)?);
        let digest = req.prompt_digest();
        let (outcome, _) = generate_parsed(gateway, &req, parse_redundancy)?;
        match outcome {
            Some(RedundancyOutcome::Keep) => {}
            Some(RedundancyOutcome::Reject(reason)) => {
                cb.record(CodebookEvent {
                    op: EventOp::Discard,
                    entry_id: entry_id.clone(),
                    reason,
                    data: Some(json!({"prompt_digest": digest, "pass": "redundancy"})),
                })?;
            }
            None => {
                cb.record(CodebookEvent {
                    op: EventOp::Flag,
                    entry_id: entry_id.clone(),
                    reason: "redundancy response was unparseable after retries".into(),
                    data: Some(json!({"prompt_digest": digest, "pass": "redundancy"})),
                })?;
            }
        }
    }

    // Step 2: clarity. Survivors may be split into sharper codes.
    let pass_ids: Vec<String> = cb.active().map(|e| e.entry_id.clone()).collect();
    for entry_id in &pass_ids {
        let Some(entry) = cb.entry(entry_id) else { continue };
        if entry.status != EntryStatus::Active {
            continue;
        }
        let (label, example, cluster_id) =
            (entry.label.clone(), entry.example.clone(), entry.provenance.cluster_id);
        let mut b = bindings.clone();
        b.insert("text".into(), label.clone());
        let req = GenerationRequest::new(prompts.render_filtered(TemplateName::SimplifyCode, &b)?);
        let digest = req.prompt_digest();
        let (outcome, _) = generate_parsed(gateway, &req, parse_clarity)?;
        match outcome {
            Some(ClarityOutcome::Keep) => {}
            Some(ClarityOutcome::Split(alternates)) => {
                let fresh: Vec<(String, String)> = alternates
                    .into_iter()
                    .filter(|(alt_label, _)| cb.find_active_label(alt_label).is_none())
                    .collect();
                if fresh.is_empty() {
                    cb.record(CodebookEvent {
                        op: EventOp::Discard,
                        entry_id: entry_id.clone(),
                        reason: "all suggested replacements already exist".into(),
                        data: Some(json!({"prompt_digest": digest, "pass": "clarity"})),
                    })?;
                    continue;
                }
                let mut new_ids = Vec::new();
                let mut new_entries = Vec::new();
                for (i, (alt_label, alt_definition)) in fresh.into_iter().enumerate() {
                    let entry_id = format!("code-{:03}", cb.entries.len() + 1 + i);
                    new_ids.push(entry_id.clone());
                    new_entries.push(CodebookEntry {
                        entry_id,
                        label: alt_label,
                        definition: alt_definition,
                        example: example.clone(),
                        status: EntryStatus::Active,
                        provenance: Provenance {
                            cluster_id,
                            stage: "simplify".into(),
                            replaced_by: None,
                        },
                    });
                }
                cb.record(CodebookEvent {
                    op: EventOp::Split,
                    entry_id: entry_id.clone(),
                    reason: format!("split '{label}' into sharper codes"),
                    data: Some(json!({
                        "replaced_by": new_ids,
                        "prompt_digest": digest,
                        "pass": "clarity",
                    })),
                })?;
                for entry in new_entries {
                    let parent = entry_id.clone();
                    let event = CodebookEvent {
                        op: EventOp::Append,
                        entry_id: entry.entry_id.clone(),
                        reason: format!("replacement for '{label}'"),
                        data: Some(json!({
                            "entry": entry,
                            "parent": parent,
                            "prompt_digest": digest,
                        })),
                    };
                    cb.record(event)?;
                }
            }
            Some(ClarityOutcome::NeedsReview(reason)) => {
                cb.record(CodebookEvent {
                    op: EventOp::Flag,
                    entry_id: entry_id.clone(),
                    reason,
                    data: Some(json!({"prompt_digest": digest, "pass": "clarity"})),
                })?;
            }
            None => {
                cb.record(CodebookEvent {
                    op: EventOp::Flag,
                    entry_id: entry_id.clone(),
                    reason: "clarity response was unparseable after retries".into(),
                    data: Some(json!({"prompt_digest": digest, "pass": "clarity"})),
                })?;
            }
        }
    }
    Ok(cb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewAction {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub entry_id: String,
    pub decision: ReviewAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Apply human accept/reject decisions. Accepts clear review flags; rejects
/// discard. Unknown entry ids fail the whole batch.
pub fn review_codebook(mut cb: Codebook, decisions: &[ReviewDecision]) -> Result<Codebook> {
    let unknown: Vec<&str> = decisions
        .iter()
        .filter(|d| cb.entry(&d.entry_id).is_none())
        .map(|d| d.entry_id.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::NotFound(format!("codebook entries: {}", unknown.join(", "))));
    }
    for d in decisions {
        match d.decision {
            ReviewAction::Accept => {
                let entry = cb.entry(&d.entry_id).expect("checked above");
                if entry.status == EntryStatus::ReviewFlagged || entry.status == EntryStatus::Active {
                    if let Some(clash) = cb
                        .active()
                        .find(|e| e.entry_id != d.entry_id && e.label.to_lowercase() == entry.label.to_lowercase())
                    {
                        return Err(Error::Input(format!(
                            "accepting {} would duplicate active label '{}' ({})",
                            d.entry_id, clash.label, clash.entry_id
                        )));
                    }
                    cb.record(CodebookEvent {
                        op: EventOp::Accept,
                        entry_id: d.entry_id.clone(),
                        reason: d.note.clone().unwrap_or_else(|| "accepted by human review".into()),
                        data: Some(json!({"source": "human"})),
                    })?;
                } else {
                    return Err(Error::Input(format!(
                        "entry {} is {:?}; only active or review-flagged entries can be accepted",
                        d.entry_id,
                        cb.entry(&d.entry_id).expect("checked above").status
                    )));
                }
            }
            ReviewAction::Reject => {
                cb.record(CodebookEvent {
                    op: EventOp::Discard,
                    entry_id: d.entry_id.clone(),
                    reason: d.note.clone().unwrap_or_else(|| "rejected by human review".into()),
                    data: Some(json!({"source": "human"})),
                })?;
            }
        }
    }
    Ok(cb)
}
