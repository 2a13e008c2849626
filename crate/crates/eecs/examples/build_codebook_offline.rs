//! Build a codebook from cluster representatives without any model server,
//! then prune and sharpen it, and prove the event log replays exactly.
//!
//! ```sh
//! cargo run --example build_codebook_offline
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use eecs::codebook::{build_codebook, simplify_codebook, BuilderParams, Codebook, Representative};
use eecs::gateway::{DemoBackend, Gateway};

fn main() -> eecs::Result<()> {
    let gateway = Gateway::shared(Arc::new(DemoBackend::new()))?;
    let bindings: BTreeMap<String, String> = [
        ("persona", "the world's best qualitative data analyst"),
        ("data_type", "student evaluation of teaching"),
        ("data_collection_context", "a university-wide end-of-term survey"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();

    let representatives: Vec<Representative> = [
        (0, "The course was very organized"),
        (1, "Office hours were helpful"),
        (2, "The feedback forms needed clarification and simplification"),
        (3, "The syllabus and schedule were structured well"),
        (4, "Answered emails within minutes"),
    ]
    .into_iter()
    .map(|(cluster_id, text)| Representative {
        cluster_id,
        idea_id: format!("idea-{cluster_id}"),
        text: text.to_string(),
    })
    .collect();

    let params = BuilderParams::default();
    let prompts = eecs::prompt::PromptSet::builtin();
    let cb = build_codebook(&representatives, &params, &bindings, &gateway, &prompts)?;
    println!("after summarize: {} entries, {} active", cb.entries.len(), cb.active_count());

    let cb = simplify_codebook(cb, &params, &bindings, &gateway, &prompts)?;
    println!("after simplify:  {} entries, {} active", cb.entries.len(), cb.active_count());
    for entry in &cb.entries {
        println!("  {} {:?} — {}", entry.entry_id, entry.label, entry.definition);
    }

    // the event log alone reconstructs the exact same state
    let replayed = Codebook::replay(&cb.event_log)?;
    assert_eq!(replayed, cb);
    println!("event log replays to an identical codebook ({} events)", cb.event_log.len());
    Ok(())
}
