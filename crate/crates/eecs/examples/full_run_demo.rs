//! Drive the whole pipeline end to end in a temp directory: run, break a
//! stage, resume, apply a review decision, and export the result.
//!
//! ```sh
//! cargo run --example full_run_demo
//! ```

use eecs::artifact::{stage_path, Stage};
use eecs::codebook::{ReviewAction, ReviewDecision};
use eecs::pipeline::config::PipelineConfig;
use eecs::pipeline::run::{export, latest_codebook, resume, run_all, run_review, ExportFormat};

fn main() -> eecs::Result<()> {
    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("corpus.csv");
    std::fs::write(
        &csv,
        "comment\n\
         \"The course was very organized.\"\n\
         \"Lectures were organized and easy to follow.\"\n\
         \"Office hours were helpful; the professor explained problems at office hours.\"\n\
         \"I visited office hours weekly.\"\n\
         \"Gave many examples in class. The examples made concepts click.\"\n\
         \"Answered emails within minutes.\"\n\
         \"Emails were answered the same day.\"\n\
         \"n/a\"\n",
    )?;

    let mut config = PipelineConfig { run_dir: dir.path().join("run"), ..Default::default() };
    config.input.path = csv;

    let manifest = run_all(config.clone())?;
    println!("ran {} stages; manifest at {:?}", manifest.stages.len(), config.run_dir.join("manifest.json"));

    // lose a middle stage, then resume: only the broken suffix re-runs
    std::fs::remove_file(stage_path(&config.run_dir, Stage::Cluster))?;
    println!("\ndeleted the cluster artifact; resuming...");
    resume(config.clone())?;

    let cb = latest_codebook(&config.run_dir)?;
    println!("\ncodebook after resume ({} active):", cb.active_count());
    for entry in cb.active() {
        println!("  {} {:?}", entry.entry_id, entry.label);
    }

    // a human rejects one code, then exports what's left
    let victim = cb.active().next().expect("non-empty codebook").entry_id.clone();
    run_review(
        &config.run_dir,
        &[ReviewDecision {
            entry_id: victim.clone(),
            decision: ReviewAction::Reject,
            note: Some("merged into a broader theme".into()),
        }],
    )?;
    println!("\nrejected {victim} by human review");

    let path = export(&config.run_dir, ExportFormat::Markdown)?;
    println!("exported active codebook:\n");
    print!("{}", std::fs::read_to_string(path)?);
    Ok(())
}
