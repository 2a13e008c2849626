//! A self-contained rule-based backend that behaves like a small instruct
//! model over a fixed set of course-feedback themes. Deterministic by
//! construction, so it can author fixtures and drive offline examples
//! end-to-end without any model server.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::gateway::{
    hash_unit_vector, strip_trailing_stop, truncate_whitespace_tokens, Backend, FinishReason,
    GenerationRequest, GenerationResponse,
};

pub const DEMO_DIMENSION: usize = 16;

struct Theme {
    name: &'static str,
    keywords: &'static [&'static str],
    /// Index of the basis coordinate this theme embeds onto.
    basis: usize,
    /// Weight of a per-theme hash offset; lets two themes share a basis
    /// direction while remaining separable clusters.
    blend: f64,
}

const THEMES: &[Theme] = &[
    Theme { name: "course organization", keywords: &["organized", "organization", "organize"], basis: 0, blend: 0.0 },
    Theme { name: "course organization clarity", keywords: &["syllabus", "schedule", "structured"], basis: 1, blend: 0.0 },
    Theme { name: "office hours availability", keywords: &["office"], basis: 2, blend: 0.0 },
    Theme { name: "in-class examples", keywords: &["examples", "example", "demonstrations"], basis: 3, blend: 0.0 },
    Theme { name: "clear explanations", keywords: &["explained", "explains", "explanation", "explanations"], basis: 4, blend: 0.0 },
    Theme { name: "exam preparation", keywords: &["exam", "exams", "midterm"], basis: 5, blend: 0.0 },
    Theme { name: "email response speed", keywords: &["email", "emails"], basis: 6, blend: 0.0 },
    Theme { name: "effective powerpoint use", keywords: &["powerpoint", "slides"], basis: 7, blend: 0.0 },
    Theme { name: "encouraging active participation", keywords: &["participation", "participate"], basis: 8, blend: 0.0 },
    Theme { name: "clarification and simplification", keywords: &["clarification", "clarify", "simplification", "simplify"], basis: 9, blend: 0.0 },
    Theme { name: "helpful feedback", keywords: &["feedback"], basis: 10, blend: 0.0 },
    Theme { name: "lecture notes quality", keywords: &["notes"], basis: 11, blend: 0.0 },
    Theme { name: "humor in teaching", keywords: &["jokes", "humor", "funny"], basis: 12, blend: 0.0 },
    // response speed sits near the email theme in embedding space but uses
    // distinct trigger words, so it clusters apart yet retrieves the email
    // code first — the reuse path.
    Theme { name: "response speed", keywords: &["responded", "responsiveness"], basis: 6, blend: 0.25 },
];

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "and", "or", "of", "in", "on", "to", "for", "with", "by", "at", "was",
    "were", "is", "are", "be", "been", "being", "it", "its", "this", "that", "these", "those",
    "from", "as", "into", "about", "during", "while", "when", "which", "their", "they", "them",
    "there", "had", "has", "have", "did", "does", "do", "very", "so",
];

const TITLE_LOWERCASE: &[&str] =
    &["a", "an", "and", "as", "at", "by", "for", "in", "of", "on", "or", "the", "to", "with"];

fn normalize_token(token: &str) -> String {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token.to_string()
    }
}

/// Content words in first-appearance order, lowercased, lightly de-pluralized.
fn significant_words(text: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for token in text.to_lowercase().split(|c: char| !(c.is_ascii_alphanumeric() || c == '-')) {
        let token = token.trim_matches('-');
        if token.is_empty() || STOPWORDS.contains(&token) {
            continue;
        }
        let token = normalize_token(token);
        if seen.insert(token.clone()) {
            out.push(token);
        }
    }
    out
}

fn overlap_count(a: &[String], b: &[String]) -> usize {
    a.iter().filter(|w| b.contains(w)).count()
}

fn title_case(text: &str) -> String {
    text.split_whitespace()
        .enumerate()
        .map(|(i, word)| {
            if i > 0 && TITLE_LOWERCASE.contains(&word) {
                word.to_string()
            } else {
                word.split('-')
                    .map(|part| {
                        let mut chars = part.chars();
                        match chars.next() {
                            Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
                            None => String::new(),
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("-")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn theme_of(text: &str) -> Option<&'static Theme> {
    let words: BTreeSet<String> = text
        .to_lowercase()
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
        .map(|t| t.trim_matches('-').to_string())
        .filter(|t| !t.is_empty())
        .collect();
    THEMES.iter().find(|t| t.keywords.iter().any(|k| words.contains(*k)))
}

fn tag_payload(prompt: &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    // prompts mention their tags in the instructions ("... in the <text> tag
    // below"), so the real payload is the last open tag, not the first
    let start = prompt.rfind(&open)? + open.len();
    let end = prompt[start..].find(&close)? + start;
    Some(prompt[start..end].trim().to_string())
}

/// Single-quoted spans, in order — how codebook labels arrive in prompts.
fn quoted_labels(block: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = block;
    while let Some(start) = rest.find('\'') {
        let after = &rest[start + 1..];
        match after.find('\'') {
            Some(end) => {
                out.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn split_clauses(text: &str) -> Vec<String> {
    text.split(['.', ';', '!', '?'])
        .map(|c| c.trim())
        .filter(|c| !c.is_empty() && c.chars().any(|ch| ch.is_alphanumeric()))
        .map(capitalize)
        .collect()
}

#[derive(Default)]
pub struct DemoBackend;

impl DemoBackend {
    pub fn new() -> Self {
        DemoBackend
    }

    fn respond_extraction(&self, prompt: &str) -> String {
        let payload = tag_payload(prompt, "text").unwrap_or_default();
        let ideas = split_clauses(&payload);
        if ideas.is_empty() {
            return "I could not identify any distinct ideas in this text.".into();
        }
        let mut out = String::from("My summary:");
        for (i, idea) in ideas.iter().enumerate() {
            out.push_str(&format!("\n{}. {}", i + 1, idea));
        }
        out
    }

    fn respond_summarize(&self, prompt: &str, with_codebook: bool) -> String {
        let payload = tag_payload(prompt, "text").unwrap_or_default();
        if with_codebook {
            let block = tag_payload(prompt, "existing codebook").unwrap_or_default();
            let labels = quoted_labels(&block);
            let payload_words = significant_words(&payload);
            let reused = labels
                .iter()
                .find(|l| overlap_count(&significant_words(l), &payload_words) >= 2);
            if let Some(label) = reused {
                let listing =
                    labels.iter().map(|l| format!("'{l}'")).collect::<Vec<_>>().join(", ");
                return format!(
                    "Step 1: Examine existing codebook. [{listing}]\n\
                     Step 2: Read the new text in the <text> tag. \"{payload}\".\n\
                     Step 3: Determine if there is an existing label to describe the text. \
                     The text seems related to '{label}'. Therefore, I will use this code from \
                     the existing codebook.\n\
                     Step 4: Since there is already a relevant label ('{label}'), no new label \
                     needs to be suggested. No new label suggested."
                );
            }
        }
        let (name, definition) = match theme_of(&payload) {
            Some(theme) => {
                (theme.name.to_string(), format!("Mentions of {} in the responses.", theme.name))
            }
            None => {
                let words = significant_words(&payload);
                let gist = words[..words.len().min(4)].join(" ");
                (gist.clone(), format!("Mentions of {gist} in the responses."))
            }
        };
        let example = payload.lines().next().unwrap_or("").trim();
        format!("Label: {}\nDefinition: {definition}\nExample: \"{example}\"", title_case(&name))
    }

    fn respond_verdict(&self, prompt: &str) -> String {
        let judged = tag_payload(prompt, "text").unwrap_or_default();
        let block = tag_payload(prompt, "existing codebook").unwrap_or_default();
        let judged_words = significant_words(&judged);
        let conflict = quoted_labels(&block).into_iter().find(|label| {
            let label_words = significant_words(label);
            overlap_count(&judged_words, &label_words) >= 2
                && judged_words.len() > label_words.len()
        });
        match conflict {
            Some(other) => format!(
                "My analysis: Step 1: I examined the existing codebook. Step 2: The code under \
                 review is '{judged}'. Step 3: The existing code '{other}' already describes \
                 this idea. Step 4: Keeping both would add redundancy to the codebook.\n\
                 My final verdict: Reject code {judged}"
            ),
            None => format!(
                "My analysis: Step 1: I examined the existing codebook. Step 2: The code under \
                 review is '{judged}'. Step 3: None of the existing codes cover the same idea \
                 with enough overlap. Step 4: The code is sufficiently different from the \
                 existing codes, so it should stay.\n\
                 My final verdict: Keep code {judged}"
            ),
        }
    }

    fn respond_simplify(&self, prompt: &str) -> String {
        let judged = tag_payload(prompt, "text").unwrap_or_default();
        let lower = judged.to_lowercase();
        if let Some((left, right)) = lower.split_once(" and ") {
            let (left, right) = (left.trim(), right.trim());
            let (l1, l2) = (title_case(left), title_case(right));
            format!(
                "My response: The given code, '{judged}', seems to be addressing two distinct \
                 aspects. Separating them would let the research team understand which aspect \
                 each response addresses.\n\n\
                 My suggestion: Discard this code and create two new codes - '{l1}' and '{l2}'.\n\n\
                 Alternate suggestion:\n\
                 - {l1}: Refers to mentions of {left} in the responses.\n\
                 - {l2}: Refers to mentions of {right} in the responses."
            )
        } else {
            format!(
                "My response: The given code, '{judged}', seems like a good code as it \
                 specifically addresses one clear aspect of the responses. It is clear and \
                 informative for the research team.\n\n\
                 My suggestion: Keep the code.\n\n\
                 Alternate suggestion: None, as the current code is already specific and clear \
                 enough for its intended purpose."
            )
        }
    }
}

impl Backend for DemoBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse> {
        let prompt = &req.prompt;
        // dispatch on fixed template text; the summarize check runs first
        // because its persona placeholder may mention other templates' wording
        let text = if prompt.contains("You specialize in creating short labels") {
            self.respond_summarize(prompt, prompt.contains("<existing codebook>"))
        } else if prompt.contains("Start your response with \"My summary:\"") {
            self.respond_extraction(prompt)
        } else if prompt.contains("world's best qualitative data analyst") {
            self.respond_verdict(prompt)
        } else if prompt.contains("world's best social science researcher") {
            self.respond_simplify(prompt)
        } else {
            return Err(Error::Backend("demo backend cannot interpret this prompt".into()));
        };
        let (text, truncated) = truncate_whitespace_tokens(&text, req.max_tokens);
        Ok(GenerationResponse {
            text: strip_trailing_stop(&text, &req.stop_sequences),
            finish_reason: if truncated { FinishReason::Length } else { FinishReason::Stop },
            latency_ms: 0,
        })
    }

    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f32>>> {
        Ok(inputs
            .iter()
            .map(|text| match theme_of(text) {
                None => hash_unit_vector(text, DEMO_DIMENSION),
                Some(theme) => {
                    let mut v = [0f64; DEMO_DIMENSION];
                    v[theme.basis] = 1.0;
                    if theme.blend > 0.0 {
                        for (i, x) in hash_unit_vector(theme.name, DEMO_DIMENSION).iter().enumerate()
                        {
                            v[i] += theme.blend * *x as f64;
                        }
                    }
                    for (i, x) in hash_unit_vector(text, DEMO_DIMENSION).iter().enumerate() {
                        v[i] += 0.05 * *x as f64;
                    }
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| (x / norm) as f32).collect()
                }
            })
            .collect())
    }

    fn name(&self) -> &str {
        "demo-model"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{
        parse_code_proposal, parse_simplification, parse_summary, parse_verdict, PromptSet,
        SimplifyDecision, TemplateName, VerdictDecision,
    };
    use std::collections::BTreeMap;

    fn bindings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn base_bindings() -> Vec<(&'static str, &'static str)> {
        vec![
            ("data_type", "student comment"),
            ("data_collection_context", "end-of-term course surveys"),
            ("persona", "the world's best qualitative data analyst"),
        ]
    }

    fn generate(prompt: String) -> String {
        DemoBackend::new().generate(&GenerationRequest::new(prompt)).unwrap().text
    }

    #[test]
    fn extraction_splits_clauses_into_numbered_ideas() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "The course was well organized. Office hours were easy to attend."));
        let prompt = prompts.render_filtered(TemplateName::Extraction, &bindings(&b)).unwrap();
        let parsed = parse_summary(&generate(prompt)).unwrap();
        assert_eq!(
            parsed.ideas,
            vec!["The course was well organized", "Office hours were easy to attend"]
        );
    }

    #[test]
    fn extraction_with_no_content_is_unparseable() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "???"));
        let prompt = prompts.render_filtered(TemplateName::Extraction, &bindings(&b)).unwrap();
        assert!(parse_summary(&generate(prompt)).is_err());
    }

    #[test]
    fn bootstrap_summary_proposes_a_themed_triplet() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "The instructor used powerpoint presentations effectively"));
        let prompt = prompts.render_filtered(TemplateName::SummarizeBootstrap, &bindings(&b)).unwrap();
        let proposal = parse_code_proposal(&generate(prompt)).unwrap();
        assert!(proposal.is_new);
        assert_eq!(proposal.label, "Effective Powerpoint Use");
        assert_eq!(proposal.definition, "Mentions of effective powerpoint use in the responses.");
        assert_eq!(proposal.example, "The instructor used powerpoint presentations effectively");
    }

    #[test]
    fn rag_summary_reuses_an_overlapping_existing_label() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "Responded quickly with good response speed"));
        b.push(("codes", "['Email Response Speed', 'Course Organization']"));
        let prompt = prompts.render_filtered(TemplateName::SummarizeCluster, &bindings(&b)).unwrap();
        let proposal = parse_code_proposal(&generate(prompt)).unwrap();
        assert!(!proposal.is_new);
        assert_eq!(proposal.label, "Email Response Speed");
    }

    #[test]
    fn rag_summary_creates_when_nothing_overlaps() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "The jokes kept the class awake"));
        b.push(("codes", "['Email Response Speed', 'Course Organization']"));
        let prompt = prompts.render_filtered(TemplateName::SummarizeCluster, &bindings(&b)).unwrap();
        let proposal = parse_code_proposal(&generate(prompt)).unwrap();
        assert!(proposal.is_new);
        assert_eq!(proposal.label, "Humor in Teaching");
    }

    #[test]
    fn verdict_rejects_the_wordier_overlapping_code_only() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "Course Organization Clarity"));
        b.push(("codes", "['Course Organization', 'Helpful Feedback']"));
        let prompt = prompts.render_filtered(TemplateName::EditCodebook, &bindings(&b)).unwrap();
        let verdict = parse_verdict(&generate(prompt)).unwrap();
        assert_eq!(verdict.decision, VerdictDecision::Reject);
        assert_eq!(verdict.code, "Course Organization Clarity");

        // judged the other way around, the shorter label survives
        let mut b = base_bindings();
        b.push(("text", "Course Organization"));
        b.push(("codes", "['Course Organization Clarity', 'Helpful Feedback']"));
        let prompt = prompts.render_filtered(TemplateName::EditCodebook, &bindings(&b)).unwrap();
        let verdict = parse_verdict(&generate(prompt)).unwrap();
        assert_eq!(verdict.decision, VerdictDecision::Keep);
    }

    #[test]
    fn simplify_keeps_single_idea_codes_and_splits_conjunctions() {
        let prompts = PromptSet::builtin();
        let mut b = base_bindings();
        b.push(("text", "Encouraging Active Participation"));
        let prompt = prompts.render_filtered(TemplateName::SimplifyCode, &bindings(&b)).unwrap();
        let outcome = parse_simplification(&generate(prompt)).unwrap();
        assert_eq!(outcome.decision, SimplifyDecision::Keep);
        assert!(outcome.alternates.is_empty());

        let mut b = base_bindings();
        b.push(("text", "Clarification and Simplification"));
        let prompt = prompts.render_filtered(TemplateName::SimplifyCode, &bindings(&b)).unwrap();
        let outcome = parse_simplification(&generate(prompt)).unwrap();
        assert_eq!(outcome.decision, SimplifyDecision::Discard);
        let labels: Vec<&str> = outcome.alternates.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, vec!["Clarification", "Simplification"]);
    }

    #[test]
    fn embeddings_group_same_theme_texts_and_separate_others() {
        let backend = DemoBackend::new();
        let texts: Vec<String> = vec![
            "The course was well organized".into(),
            "Everything about the class felt organized".into(),
            "Answered emails within minutes".into(),
        ];
        let v = backend.embed(&texts).unwrap();
        let cos = |a: &[f32], b: &[f32]| -> f64 {
            a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum::<f64>()
        };
        assert!(cos(&v[0], &v[1]) > 0.99, "same theme should be near-parallel");
        assert!(cos(&v[0], &v[2]).abs() < 0.2, "different themes should be near-orthogonal");
        // deterministic across calls
        assert_eq!(backend.embed(&texts).unwrap(), v);
    }

    #[test]
    fn response_speed_theme_sits_near_the_email_theme() {
        let backend = DemoBackend::new();
        let v = backend
            .embed(&[
                "Responded quickly with good response speed".into(),
                "Answered emails within minutes".into(),
                "The jokes kept the class awake".into(),
            ])
            .unwrap();
        let cos = |a: &[f32], b: &[f32]| -> f64 {
            a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum::<f64>()
        };
        let near = cos(&v[0], &v[1]);
        assert!((0.9..0.999).contains(&near), "close but not coincident: {near}");
        assert!(cos(&v[0], &v[2]).abs() < 0.2);
    }

    #[test]
    fn unknown_prompt_shape_is_a_backend_error() {
        let err = DemoBackend::new()
            .generate(&GenerationRequest::new("write me a poem"))
            .unwrap_err();
        assert!(matches!(err, Error::Backend(_)));
    }
}
