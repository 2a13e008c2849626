//! Prompt templates and response parsers.
//!
//! Five templates ship embedded in the binary and can be overridden per run
//! by pointing `prompt_dir` at a directory containing same-named `.txt`
//! files. Placeholders use `{name}` syntax; rendering is strict in both
//! directions (no missing, no extra bindings).
//!
//! The four parsers are total: any input yields either a structured record
//! or a `MalformedResponse`, never a panic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parser failure; callers retry the generation and eventually flag the item.
#[derive(Debug, Clone, thiserror::Error)]
#[error("malformed response: {reason}")]
pub struct MalformedResponse {
    pub reason: String,
}

impl MalformedResponse {
    fn new(reason: impl Into<String>) -> Self {
        MalformedResponse { reason: reason.into() }
    }
}

pub type ParseResult<T> = std::result::Result<T, MalformedResponse>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Extraction,
    SummarizeBootstrap,
    SummarizeCluster,
    EditCodebook,
    SimplifyCode,
}

impl TemplateName {
    pub const ALL: [TemplateName; 5] = [
        TemplateName::Extraction,
        TemplateName::SummarizeBootstrap,
        TemplateName::SummarizeCluster,
        TemplateName::EditCodebook,
        TemplateName::SimplifyCode,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateName::Extraction => "extraction",
            TemplateName::SummarizeBootstrap => "summarize_bootstrap",
            TemplateName::SummarizeCluster => "summarize_cluster",
            TemplateName::EditCodebook => "edit_codebook",
            TemplateName::SimplifyCode => "simplify_code",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Placeholder names a template body may use.
const KNOWN_PLACEHOLDERS: [&str; 5] =
    ["data_type", "data_collection_context", "persona", "text", "codes"];

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(name: TemplateName, body: String) -> Result<Self> {
        let required = placeholders_in(&body);
        for p in &required {
            if !KNOWN_PLACEHOLDERS.contains(&p.as_str()) {
                return Err(Error::Config(format!(
                    "template {name}: unknown placeholder {{{p}}}"
                )));
            }
        }
        Ok(PromptTemplate { name, body, required_placeholders: required })
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

fn placeholders_in(body: &str) -> BTreeSet<String> {
    placeholder_re()
        .captures_iter(body)
        .map(|c| c[1].to_string())
        .collect()
}

/// The full template set for a run, with stable digests for the manifest.
#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<TemplateName, PromptTemplate>,
}

impl PromptSet {
    /// The embedded default templates.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        for (name, body) in [
            (TemplateName::Extraction, include_str!("../prompts/extraction.txt")),
            (TemplateName::SummarizeBootstrap, include_str!("../prompts/summarize_bootstrap.txt")),
            (TemplateName::SummarizeCluster, include_str!("../prompts/summarize_cluster.txt")),
            (TemplateName::EditCodebook, include_str!("../prompts/edit_codebook.txt")),
            (TemplateName::SimplifyCode, include_str!("../prompts/simplify_code.txt")),
        ] {
            let t = PromptTemplate::new(name, body.to_string())
                .expect("builtin template must be valid");
            templates.insert(name, t);
        }
        PromptSet { templates }
    }

    /// Builtin templates with any same-named `<name>.txt` file in `dir`
    /// replacing the embedded body.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut set = PromptSet::builtin();
        for name in TemplateName::ALL {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                let body = std::fs::read_to_string(&path)?;
                set.templates.insert(name, PromptTemplate::new(name, body)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        &self.templates[&name]
    }

    /// sha256 of each template body, keyed by template name.
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.templates
            .iter()
            .map(|(name, t)| (name.to_string(), crate::artifact::sha256_hex(t.body.as_bytes())))
            .collect()
    }

    /// Strict textual substitution: `bindings` must cover exactly the
    /// placeholders the template body uses.
    pub fn render(&self, name: TemplateName, bindings: &BTreeMap<String, String>) -> Result<String> {
        let template = self.get(name);
        for required in &template.required_placeholders {
            if !bindings.contains_key(required.as_str()) {
                return Err(Error::Input(format!(
                    "render {name}: missing placeholder binding {required:?}"
                )));
            }
        }
        for key in bindings.keys() {
            if !template.required_placeholders.contains(key.as_str()) {
                return Err(Error::Input(format!(
                    "render {name}: unknown placeholder key {key:?}"
                )));
            }
        }
        let rendered = placeholder_re()
            .replace_all(&template.body, |caps: &regex::Captures<'_>| {
                bindings[&caps[1]].clone()
            })
            .into_owned();
        Ok(rendered)
    }

    /// Like [`PromptSet::render`], but tolerant of surplus bindings: each
    /// template picks what it needs from one shared map. Missing keys still
    /// fail.
    pub fn render_filtered(
        &self,
        name: TemplateName,
        bindings: &BTreeMap<String, String>,
    ) -> Result<String> {
        let template = self.get(name);
        let filtered: BTreeMap<String, String> = bindings
            .iter()
            .filter(|(k, _)| template.required_placeholders.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        self.render(name, &filtered)
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet::builtin()
    }
}

// ---------------------------------------------------------------------------
// Parsed structures
// ---------------------------------------------------------------------------

/// Enumerated ideas following the "My summary:" marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSummary {
    pub ideas: Vec<String>,
}

/// A proposed code, or a reuse of an existing one (`is_new == false`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedCodeProposal {
    pub label: String,
    pub definition: String,
    pub example: String,
    pub is_new: bool,
    /// Labels beyond the first proposal; consumed for logging only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictDecision {
    Keep,
    Reject,
}

/// "My final verdict: Keep/Reject code <code>".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedVerdict {
    pub decision: VerdictDecision,
    pub code: String,
    pub reasoning: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplifyDecision {
    Keep,
    Discard,
}

/// "My suggestion:" keep/discard with optional alternate codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSimplification {
    pub decision: SimplifyDecision,
    pub reasoning: String,
    /// (label, definition) pairs; empty when the decision is keep.
    pub alternates: Vec<(String, String)>,
    /// Discard without parseable alternates: route to human review.
    pub needs_review: bool,
}

// ---------------------------------------------------------------------------
// Parsers
// ---------------------------------------------------------------------------

fn regex(pattern: &str) -> Regex {
    Regex::new(pattern).expect("static regex must compile")
}

/// Strip one pair of symmetric surrounding quotes, then trim.
fn strip_quotes(s: &str) -> String {
    let t = s.trim();
    let stripped = [("\"", "\""), ("'", "'"), ("``", "''"), ("\u{201c}", "\u{201d}"), ("\u{2018}", "\u{2019}")]
        .iter()
        .find_map(|(open, close)| {
            t.strip_prefix(open)
                .and_then(|rest| rest.strip_suffix(close))
                .filter(|inner| !inner.is_empty())
        });
    stripped.unwrap_or(t).trim().to_string()
}

/// Parse the enumerated list after "My summary:". Numbering must be
/// contiguous from 1; prose before the first item is tolerated, anything
/// after the last item is ignored.
pub fn parse_summary(response_text: &str) -> ParseResult<ParsedSummary> {
    let marker = regex(r"(?mi)^[ \t]*my summary\s*:");
    let m = marker
        .find(response_text)
        .ok_or_else(|| MalformedResponse::new("missing \"My summary:\" marker"))?;
    let rest = &response_text[m.end()..];

    let item = regex(r"^\s*(\d{1,4})[.)]\s*(.*)$");
    let mut ideas: Vec<String> = Vec::new();
    for line in rest.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match item.captures(line) {
            Some(caps) => {
                let number: usize = caps[1]
                    .parse()
                    .map_err(|_| MalformedResponse::new("unreadable item number"))?;
                if number != ideas.len() + 1 {
                    return Err(MalformedResponse::new(format!(
                        "non-contiguous numbering: expected {}, found {number}",
                        ideas.len() + 1
                    )));
                }
                let text = strip_quotes(&caps[2]);
                if text.is_empty() {
                    return Err(MalformedResponse::new(format!("item {number} is empty")));
                }
                ideas.push(text);
            }
            None if ideas.is_empty() => continue, // prose before the list
            None => break,                        // trailing commentary
        }
    }
    if ideas.is_empty() {
        return Err(MalformedResponse::new("no enumerated items after marker"));
    }
    Ok(ParsedSummary { ideas })
}

/// Reuse phrasing used when the model declines to add a new code.
fn reuse_phrase_offset(text: &str) -> Option<usize> {
    regex(r"(?i)no new (?:label|code)").find(text).map(|m| m.start())
}

/// Last quoted span that closes before `end`, for pulling the reused label
/// out of prose like "a relevant label ('response speed'), no new label...".
fn last_quoted_span_before(text: &str, end: usize) -> Option<String> {
    let head = &text[..end];
    let closer = head.rfind(['\'', '"'])?;
    let quote = head[closer..].chars().next()?;
    let opener = head[..closer].rfind(quote)?;
    let span = head[opener + quote.len_utf8()..closer]
        .trim()
        .trim_matches(|c: char| "()[].,;:".contains(c))
        .trim();
    if span.is_empty() {
        None
    } else {
        Some(span.to_string())
    }
}

/// Parse a Label/Definition/Example triplet, or detect reuse phrasing.
pub fn parse_code_proposal(response_text: &str) -> ParseResult<ParsedCodeProposal> {
    let label_re = regex(r"(?mi)^[ \t]*label\s*:[ \t]*(.*)$");
    let def_re = regex(r"(?mi)^[ \t]*definition\s*:[ \t]*(.*)$");
    let ex_re = regex(r"(?mi)^[ \t]*example\s*:[ \t]*(.*)$");

    let labels: Vec<_> = label_re.captures_iter(response_text).collect();
    if let Some(first) = labels.first() {
        let label_end = first.get(0).map(|m| m.end()).unwrap_or(0);
        let label = strip_quotes(&first[1]);
        let definition = def_re
            .captures_iter(response_text)
            .find(|c| c.get(0).map(|m| m.start() >= label_end).unwrap_or(false))
            .map(|c| strip_quotes(&c[1]))
            .unwrap_or_default();
        let example = ex_re
            .captures_iter(response_text)
            .find(|c| c.get(0).map(|m| m.start() >= label_end).unwrap_or(false))
            .map(|c| strip_quotes(&c[1]))
            .unwrap_or_default();
        if label.is_empty() || definition.is_empty() || example.is_empty() {
            return Err(MalformedResponse::new(
                "proposal is missing label, definition, or example",
            ));
        }
        let extra_labels = labels
            .iter()
            .skip(1)
            .map(|c| strip_quotes(&c[1]))
            .filter(|l| !l.is_empty())
            .collect();
        return Ok(ParsedCodeProposal { label, definition, example, is_new: true, extra_labels });
    }

    if let Some(offset) = reuse_phrase_offset(response_text) {
        let label = last_quoted_span_before(response_text, offset).unwrap_or_default();
        return Ok(ParsedCodeProposal {
            label,
            definition: String::new(),
            example: String::new(),
            is_new: false,
            extra_labels: Vec::new(),
        });
    }

    Err(MalformedResponse::new(
        "neither a Label/Definition/Example triplet nor a reuse statement found",
    ))
}

/// Parse "My final verdict: Keep code X" / "Reject code X".
pub fn parse_verdict(response_text: &str) -> ParseResult<ParsedVerdict> {
    let marker = regex(r"(?i)my final verdict\s*:\s*");
    let m = marker
        .find(response_text)
        .ok_or_else(|| MalformedResponse::new("missing \"My final verdict:\" marker"))?;
    let after = &response_text[m.end()..];
    let verdict_line = after
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");

    let decision_re = regex(r"(?i)^(keep|reject)\b(?:\s+(?:the\s+)?code\b)?\s*(.*)$");
    let caps = decision_re.captures(verdict_line).ok_or_else(|| {
        MalformedResponse::new(format!("verdict line {verdict_line:?} has no keep/reject"))
    })?;
    let decision = if caps[1].eq_ignore_ascii_case("keep") {
        VerdictDecision::Keep
    } else {
        VerdictDecision::Reject
    };
    let code = strip_quotes(
        caps[2]
            .trim()
            .trim_matches(|c: char| "<>".contains(c))
            .trim_end_matches(['.', '!']),
    );

    let mut reasoning = response_text[..m.start()].trim();
    let analysis = regex(r"(?mi)^[ \t]*my analysis\s*:\s*");
    if let Some(a) = analysis.find(reasoning) {
        reasoning = reasoning[a.end()..].trim();
    }
    Ok(ParsedVerdict { decision, code, reasoning: reasoning.to_string() })
}

/// Parse "My suggestion:" keep/discard plus any "Alternate suggestion:" codes.
pub fn parse_simplification(response_text: &str) -> ParseResult<ParsedSimplification> {
    let suggestion_marker = regex(r"(?i)my suggestion\s*:\s*");
    let m = suggestion_marker
        .find(response_text)
        .ok_or_else(|| MalformedResponse::new("missing \"My suggestion:\" marker"))?;

    let alternate_marker = regex(r"(?i)alternate suggestion\s*:\s*");
    let alt = alternate_marker.find_at(response_text, m.end());
    let suggestion_end = alt.map(|a| a.start()).unwrap_or(response_text.len());
    let suggestion = response_text[m.end()..suggestion_end].trim();

    let keep_re = regex(r"(?i)\bkeep\b");
    let discard_re = regex(r"(?i)\bdiscard\b");
    let decision = match (keep_re.find(suggestion), discard_re.find(suggestion)) {
        (Some(k), Some(d)) if k.start() < d.start() => SimplifyDecision::Keep,
        (Some(_), Some(_)) => SimplifyDecision::Discard,
        (Some(_), None) => SimplifyDecision::Keep,
        (None, Some(_)) => SimplifyDecision::Discard,
        (None, None) => {
            return Err(MalformedResponse::new("suggestion contains neither keep nor discard"))
        }
    };

    let mut reasoning = response_text[..m.start()].trim();
    let response_marker = regex(r"(?mi)^[ \t]*my response\s*:\s*");
    if let Some(r) = response_marker.find(reasoning) {
        reasoning = reasoning[r.end()..].trim();
    }

    let mut alternates = Vec::new();
    if decision == SimplifyDecision::Discard {
        if let Some(a) = alt {
            let bullet = regex(r"^\s*[-*\u{2022}]\s*(.+?)\s*:\s*(.+)$");
            for line in response_text[a.end()..].lines() {
                if let Some(caps) = bullet.captures(line) {
                    let label = strip_quotes(&caps[1]);
                    let definition = strip_quotes(&caps[2]);
                    if !label.is_empty() && !definition.is_empty() {
                        alternates.push((label, definition));
                    }
                }
            }
        }
    }

    let needs_review = decision == SimplifyDecision::Discard && alternates.is_empty();
    Ok(ParsedSimplification {
        decision,
        reasoning: reasoning.to_string(),
        alternates,
        needs_review,
    })
}
