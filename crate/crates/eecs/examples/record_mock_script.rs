//! Record every model exchange from a live run into a replayable script,
//! then replay the same requests offline and get identical outputs. Useful
//! for pinning fixtures from a real backend once and testing against them
//! forever after.
//!
//! ```sh
//! cargo run --example record_mock_script
//! ```

use std::sync::Arc;

use eecs::gateway::{DemoBackend, Gateway, GenerationRequest, MockBackend, RecordingBackend, DEMO_DIMENSION};

fn main() -> eecs::Result<()> {
    // the demo backend stands in for a real model server here
    let recorder = Arc::new(RecordingBackend::new(DemoBackend::new(), DEMO_DIMENSION));
    let live = Gateway::shared(recorder.clone())?;

    let prompts = eecs::prompt::PromptSet::builtin();
    let bindings = [
        ("persona", "the world's best qualitative data analyst"),
        ("data_type", "student evaluation of teaching"),
        ("data_collection_context", "a university-wide end-of-term survey"),
        ("text", "The course was very organized. Office hours were helpful."),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let req = GenerationRequest::new(
        prompts.render_filtered(eecs::prompt::TemplateName::Extraction, &bindings)?,
    );

    let live_text = live.generate(&req)?.text;
    let live_vectors = live.embed(&["Office hours were helpful".into()])?.vectors;
    println!("live response:\n{live_text}\n");

    // persist the script, reload it, and replay without the live backend
    let dir = tempfile::tempdir()?;
    let script_path = dir.path().join("script.json");
    recorder.script().save(&script_path)?;
    println!("recorded script: {}", std::fs::read_to_string(&script_path)?.len());

    let replay = Gateway::shared(Arc::new(MockBackend::new(
        eecs::gateway::MockScript::load(&script_path)?,
    )))?;
    assert_eq!(replay.generate(&req)?.text, live_text);
    assert_eq!(replay.embed(&["Office hours were helpful".into()])?.vectors, live_vectors);
    println!("replay matches the recording bit for bit");
    Ok(())
}
