//! Idea extraction: run each screened-in document through the extraction
//! prompt, parse the enumerated ideas, and aggregate per-document counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, GenerationRequest};
use crate::prompt::{parse_summary, PromptSet, TemplateName};

/// Re-generations attempted after a malformed response before flagging.
pub const MALFORMED_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedIdea {
    pub idea_id: String,
    pub doc_id: String,
    /// 1-based position within the source document.
    pub ordinal: u32,
    pub text: String,
}

pub fn idea_id(doc_id: &str, ordinal: u32) -> String {
    format!("{doc_id}-i{ordinal}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub docs_processed: usize,
    pub ideas_total: usize,
    /// ideas-per-document -> number of documents (flagged docs excluded).
    pub ideas_per_doc_histogram: BTreeMap<usize, usize>,
    /// Rounded to one decimal place.
    pub mean: f64,
    pub median: f64,
    /// Documents that produced no parseable ideas after retries.
    pub flagged_docs: Vec<String>,
}

fn render_extraction(prompts: &PromptSet, bindings: &BTreeMap<String, String>, text: &str) -> Result<String> {
    let mut b = bindings.clone();
    b.insert("text".into(), text.to_string());
    prompts.render_filtered(TemplateName::Extraction, &b)
}

fn ideas_from_response(doc_id: &str, response: &str) -> crate::prompt::ParseResult<Vec<ExtractedIdea>> {
    let parsed = parse_summary(response)?;
    Ok(parsed
        .ideas
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let ordinal = (i + 1) as u32;
            ExtractedIdea { idea_id: idea_id(doc_id, ordinal), doc_id: doc_id.to_string(), ordinal, text }
        })
        .collect())
}

/// Extract ideas from one document, retrying malformed responses with fresh
/// (cache-skipping) generations before giving up.
pub fn extract_ideas(
    doc: &Document,
    bindings: &BTreeMap<String, String>,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Vec<ExtractedIdea>> {
    if doc.screened_out {
        return Err(Error::Input(format!("document {} is screened out", doc.doc_id)));
    }
    let req = GenerationRequest::new(render_extraction(prompts, bindings, &doc.text)?);
    let mut response = gateway.generate(&req)?;
    let mut last_err = match ideas_from_response(&doc.doc_id, &response.text) {
        Ok(ideas) => return Ok(ideas),
        Err(e) => e,
    };
    for _ in 0..MALFORMED_RETRIES {
        response = gateway.generate_fresh(&req)?;
        match ideas_from_response(&doc.doc_id, &response.text) {
            Ok(ideas) => return Ok(ideas),
            Err(e) => last_err = e,
        }
    }
    Err(Error::Malformed(last_err))
}

/// Extract the whole corpus: screened-in documents only, requests batched
/// through the gateway's concurrency ceiling, output restored to document
/// order. Documents that stay malformed are flagged, not fatal.
pub fn extract_corpus(
    docs: &[Document],
    bindings: &BTreeMap<String, String>,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<(Vec<ExtractedIdea>, ExtractionReport)> {
    let live: Vec<&Document> = docs.iter().filter(|d| !d.screened_out).collect();
    let requests: Vec<GenerationRequest> = live
        .iter()
        .map(|doc| Ok(GenerationRequest::new(render_extraction(prompts, bindings, &doc.text)?)))
        .collect::<Result<_>>()?;
    let responses = gateway.generate_many(&requests)?;

    let mut ideas = Vec::new();
    let mut counts = Vec::new();
    let mut flagged = Vec::new();
    for (doc, (req, response)) in live.iter().zip(requests.iter().zip(responses)) {
        let mut outcome = ideas_from_response(&doc.doc_id, &response.text);
        let mut attempts = 0;
        while outcome.is_err() && attempts < MALFORMED_RETRIES {
            attempts += 1;
            let fresh = gateway.generate_fresh(req)?;
            outcome = ideas_from_response(&doc.doc_id, &fresh.text);
        }
        match outcome {
            Ok(doc_ideas) => {
                counts.push(doc_ideas.len());
                ideas.extend(doc_ideas);
            }
            Err(_) => flagged.push(doc.doc_id.clone()),
        }
    }
    let report = extraction_stats(&counts, live.len(), flagged);
    Ok((ideas, report))
}

/// Aggregate per-document idea counts into the distribution report.
pub fn extraction_stats(counts: &[usize], docs_processed: usize, flagged_docs: Vec<String>) -> ExtractionReport {
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in counts {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let ideas_total: usize = counts.iter().sum();
    let mean = if counts.is_empty() {
        0.0
    } else {
        let raw = ideas_total as f64 / counts.len() as f64;
        (raw * 10.0).round() / 10.0
    };
    let median = {
        let mut sorted = counts.to_vec();
        sorted.sort_unstable();
        match sorted.len() {
            0 => 0.0,
            n if n % 2 == 1 => sorted[n / 2] as f64,
            n => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
        }
    };
    ExtractionReport {
        docs_processed,
        ideas_total,
        ideas_per_doc_histogram: histogram,
        mean,
        median,
        flagged_docs,
    }
}

/// Ideas containing a capitalized token after the first word — possible
/// names the model failed to remove. Logged for human spot-checking only.
pub fn deidentification_suspects(ideas: &[ExtractedIdea]) -> Vec<&ExtractedIdea> {
    ideas
        .iter()
        .filter(|idea| {
            idea.text.split_whitespace().skip(1).any(|token| {
                let trimmed = token.trim_matches(|c: char| !c.is_alphanumeric());
                let mut chars = trimmed.chars();
                match chars.next() {
                    Some(first) if first.is_uppercase() => {
                        let rest = chars.as_str();
                        !rest.is_empty() && rest.chars().all(|c| c.is_lowercase())
                    }
                    _ => false,
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Backend, MockBackend, MockScript};
    use std::sync::Arc;

    fn bindings() -> BTreeMap<String, String> {
        [
            ("data_type", "student comment"),
            ("data_collection_context", "end-of-term course surveys"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    fn doc(id: u64, text: &str) -> Document {
        Document {
            doc_id: format!("doc-{id:05}"),
            text: text.into(),
            source_row: id,
            metadata: None,
            screened_out: false,
            screen_reason: None,
        }
    }

    fn gateway_scripted(pairs: &[(&str, &str)]) -> Gateway {
        let prompts = PromptSet::builtin();
        let mut script = MockScript { dimension: 4, ..MockScript::default() };
        for (text, response) in pairs {
            let prompt = render_extraction(&prompts, &bindings(), text).unwrap();
            script.script_response(&prompt, *response);
        }
        Gateway::shared(Arc::new(MockBackend::new(script))).unwrap()
    }

    #[test]
    fn ideas_get_contiguous_ordinals_and_stable_ids() {
        let gw = gateway_scripted(&[(
            "She did examples and explained how problems were done.",
            "My summary: \n1. Provided examples \n2. Explained problem-solving process",
        )]);
        let doc = doc(0, "She did examples and explained how problems were done.");
        let ideas = extract_ideas(&doc, &bindings(), &gw, &PromptSet::builtin()).unwrap();
        assert_eq!(ideas.len(), 2);
        assert_eq!(ideas[0].idea_id, "doc-00000-i1");
        assert_eq!(ideas[0].text, "Provided examples");
        assert_eq!(ideas[1].idea_id, "doc-00000-i2");
        assert_eq!(ideas[1].ordinal, 2);
    }

    #[test]
    fn screened_out_documents_are_rejected() {
        let gw = gateway_scripted(&[]);
        let mut d = doc(0, "whatever");
        d.screened_out = true;
        assert!(extract_ideas(&d, &bindings(), &gw, &PromptSet::builtin()).is_err());
    }

    #[test]
    fn vacuous_but_wellformed_summaries_parse_faithfully() {
        let gw = gateway_scripted(&[("nothing much really", "My summary:\n1. Nothing")]);
        let ideas =
            extract_ideas(&doc(0, "nothing much really"), &bindings(), &gw, &PromptSet::builtin())
                .unwrap();
        assert_eq!(ideas.len(), 1);
        assert_eq!(ideas[0].text, "Nothing");
    }

    #[test]
    fn corpus_extraction_flags_persistently_malformed_docs() {
        let gw = gateway_scripted(&[
            ("good doc", "My summary:\n1. One idea"),
            ("bad doc", "no marker at all"),
        ]);
        let docs = vec![doc(0, "good doc"), doc(1, "bad doc")];
        let (ideas, report) =
            extract_corpus(&docs, &bindings(), &gw, &PromptSet::builtin()).unwrap();
        assert_eq!(ideas.len(), 1);
        assert_eq!(report.docs_processed, 2);
        assert_eq!(report.flagged_docs, vec!["doc-00001"]);
        assert_eq!(report.ideas_total, 1);
    }

    #[test]
    fn retry_uses_fresh_generations_until_parse_succeeds() {
        // a backend that fails to format on the first call, then succeeds
        struct Improving {
            calls: std::sync::atomic::AtomicU32,
        }
        impl Backend for Improving {
            fn generate(&self, _req: &GenerationRequest) -> crate::error::Result<crate::gateway::GenerationResponse> {
                let n = self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let text = if n == 0 { "oops".to_string() } else { "My summary:\n1. Fixed".to_string() };
                Ok(crate::gateway::GenerationResponse {
                    text,
                    finish_reason: crate::gateway::FinishReason::Stop,
                    latency_ms: 0,
                })
            }
            fn embed(&self, _inputs: &[String]) -> crate::error::Result<Vec<Vec<f32>>> {
                unreachable!()
            }
            fn name(&self) -> &str {
                "improving"
            }
        }
        let gw = Gateway::shared(Arc::new(Improving { calls: std::sync::atomic::AtomicU32::new(0) }))
            .unwrap();
        let ideas = extract_ideas(&doc(0, "text"), &bindings(), &gw, &PromptSet::builtin()).unwrap();
        assert_eq!(ideas[0].text, "Fixed");
    }

    #[test]
    fn stats_match_hand_arithmetic() {
        let report = extraction_stats(&[2, 3, 3, 4], 4, vec![]);
        assert_eq!(report.mean, 3.0);
        assert_eq!(report.median, 3.0);
        assert_eq!(report.ideas_total, 12);
        assert_eq!(report.ideas_per_doc_histogram, BTreeMap::from([(2, 1), (3, 2), (4, 1)]));

        let single = extraction_stats(&[1], 1, vec![]);
        assert_eq!(single.mean, 1.0);
        assert_eq!(single.median, 1.0);

        let uneven = extraction_stats(&[1, 2], 2, vec![]);
        assert_eq!(uneven.mean, 1.5);
        assert_eq!(uneven.median, 1.5);

        let rounded = extraction_stats(&[1, 1, 2], 3, vec![]);
        assert_eq!(rounded.mean, 1.3, "mean reports one decimal place");

        let empty = extraction_stats(&[], 0, vec![]);
        assert_eq!(empty.mean, 0.0);
        assert_eq!(empty.median, 0.0);
    }

    #[test]
    fn capitalized_mid_idea_tokens_are_suspects() {
        let ideas = vec![
            ExtractedIdea { idea_id: "d-i1".into(), doc_id: "d".into(), ordinal: 1, text: "Professor Jameson made examples fun".into() },
            ExtractedIdea { idea_id: "d-i2".into(), doc_id: "d".into(), ordinal: 2, text: "Provided examples".into() },
            ExtractedIdea { idea_id: "d-i3".into(), doc_id: "d".into(), ordinal: 3, text: "Used POWERPOINT well".into() },
        ];
        let suspects = deidentification_suspects(&ideas);
        assert_eq!(suspects.len(), 1);
        assert_eq!(suspects[0].idea_id, "d-i1");
    }
}
