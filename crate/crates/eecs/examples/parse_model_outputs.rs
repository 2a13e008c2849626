//! Parse the four response shapes the pipeline expects from a model:
//! idea summaries, code proposals, keep/reject verdicts, and simplification
//! suggestions — including how malformed text is rejected.
//!
//! ```sh
//! cargo run --example parse_model_outputs
//! ```

use eecs::prompt::{parse_code_proposal, parse_simplification, parse_summary, parse_verdict};

fn main() {
    let summary = "My summary:\n1. Responded quickly to emails\n2. Turned in good work";
    let parsed = parse_summary(summary).expect("well-formed summary");
    println!("summary ideas: {:?}", parsed.ideas);

    let proposal = "Label: Email Response Speed\n\
                    Definition: Mentions of how fast the instructor answers email.\n\
                    Example: \"Answered emails within minutes.\"";
    let parsed = parse_code_proposal(proposal).expect("well-formed proposal");
    println!("proposal: new={} label={:?}", parsed.is_new, parsed.label);

    let reuse = "The text seems related to 'Email Response Speed'. \
                 Since there is already a relevant label, no new label needs to be suggested. \
                 No new label suggested.";
    let parsed = parse_code_proposal(reuse).expect("reuse phrasing");
    println!("reuse: new={} label={:?}", parsed.is_new, parsed.label);

    let verdict = "My analysis: the existing codes already cover this idea.\n\
                   My final verdict: Reject code Course Organization Clarity";
    let parsed = parse_verdict(verdict).expect("well-formed verdict");
    println!("verdict: {:?} code={:?}", parsed.decision, parsed.code);

    let simplification = "My response: The code bundles two distinct aspects.\n\
                          My suggestion: Discard this code and create two new codes.\n\
                          Alternate suggestion:\n\
                          - Clarification: Refers to mentions of clarification.\n\
                          - Simplification: Refers to mentions of simplification.";
    let parsed = parse_simplification(simplification).expect("well-formed simplification");
    println!(
        "simplification: {:?} alternates={:?}",
        parsed.decision,
        parsed.alternates.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>()
    );

    // responses that miss the contract are errors, not silent guesses
    for bad in ["no marker at all", "My summary:\n1. ok\n3. skipped two"] {
        println!("malformed {:?} -> {}", bad, parse_summary(bad).unwrap_err());
    }
}
