//! Fixture regeneration helpers. These are not part of the test suite; run
//! them explicitly when the fixture corpus or prompt templates change:
//!
//! ```sh
//! cargo test -p eecs --test tools -- --ignored record_golden_mock_script
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use eecs::artifact::Stage;
use eecs::gateway::{DemoBackend, Gateway, RecordingBackend, DEMO_DIMENSION};
use eecs::pipeline::config::PipelineConfig;
use eecs::pipeline::manifest::RunManifest;
use eecs::pipeline::run::{execute_stage, RunContext};
use eecs::prompt::PromptSet;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Replay the golden corpus through the demo backend while recording every
/// exchange, then freeze the script used by the mock-backend golden run.
#[test]
#[ignore = "fixture regeneration tool, writes into tests/fixtures"]
fn record_golden_mock_script() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = PipelineConfig::load(&fixture("golden_config.json")).unwrap();
    config.run_dir = tmp.path().join("run");

    let recorder = Arc::new(RecordingBackend::new(DemoBackend::new(), DEMO_DIMENSION));
    let prompts = PromptSet::builtin();
    let manifest = RunManifest::load_or_new(&config.run_dir, &config, &prompts);
    let mut ctx = RunContext {
        gateway: Gateway::shared(recorder.clone()).unwrap(),
        config,
        prompts,
        manifest,
    };
    for stage in Stage::PIPELINE {
        execute_stage(&mut ctx, stage).unwrap();
    }

    let script = recorder.script();
    assert!(!script.responses.is_empty() && !script.embeddings.is_empty());
    script.save(&fixture("mock_script.json")).unwrap();
    println!(
        "recorded {} responses and {} embeddings",
        script.responses.len(),
        script.embeddings.len()
    );
}
