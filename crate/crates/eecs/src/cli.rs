//! Command-line interface: one subcommand per stage plus run/resume/review/export.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::artifact::Stage;
use crate::codebook::{Codebook, EntryStatus, ReviewAction, ReviewDecision};
use crate::error::{Error, Result};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::run::{
    export, latest_codebook, read_decisions, resume, run_all, run_review, run_stage,
};

#[derive(Debug, Parser)]
#[command(name = "eecs", version, about = "Distill free-text survey responses into a qualitative codebook")]
pub struct Cli {
    /// Pipeline configuration file (JSON).
    #[arg(short, long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Use this run directory instead of the configured one.
    #[arg(long, global = true, value_name = "PATH")]
    pub run_dir: Option<PathBuf>,

    /// Override one configuration field, e.g. clustering.min_cluster_size=3.
    #[arg(long = "stage-override", global = true, value_name = "KEY=VALUE")]
    pub stage_overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read the input corpus and screen out junk responses.
    Ingest,
    /// Split each screened response into atomic ideas.
    Extract,
    /// Embed the extracted ideas as vectors.
    Embed,
    /// Group idea vectors into clusters.
    Cluster,
    /// Pick one representative idea per cluster.
    Represent,
    /// Turn representatives into codebook entries.
    Summarize,
    /// Merge redundant entries and split vague ones.
    Simplify,
    /// Run every stage in order.
    Run,
    /// Re-run only the stages that are missing or stale.
    Resume,
    /// Apply human accept/reject decisions to the codebook.
    Review {
        /// JSONL file of decisions; prompts on stdin when omitted.
        #[arg(long, value_name = "PATH")]
        decisions: Option<PathBuf>,
    },
    /// Write the active codebook to the run directory.
    Export {
        /// Output format: json, markdown, or csv.
        #[arg(long, default_value = "json")]
        format: String,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config <PATH>".into()))?;
    let mut config = PipelineConfig::load(path)?;
    for spec in &cli.stage_overrides {
        let (key, value) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("stage override '{spec}' is not of the form key=value"))
        })?;
        config.apply_override(key, value)?;
    }
    if let Some(dir) = &cli.run_dir {
        config.run_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn resolve_run_dir(cli: &Cli) -> Result<PathBuf> {
    if let Some(dir) = &cli.run_dir {
        return Ok(dir.clone());
    }
    if cli.config.is_some() {
        return Ok(load_config(cli)?.run_dir);
    }
    Err(Error::Config("pass --run-dir or --config to locate the run".into()))
}

fn status_name(status: EntryStatus) -> &'static str {
    match status {
        EntryStatus::Active => "active",
        EntryStatus::Discarded => "discarded",
        EntryStatus::SplitParent => "split_parent",
        EntryStatus::ReviewFlagged => "review_flagged",
    }
}

/// Walk the reviewable entries, asking accept/reject/skip for each. Stops at
/// end of input; skipped entries produce no decision.
pub fn collect_interactive_decisions<R: BufRead, W: Write>(
    cb: &Codebook,
    mut input: R,
    mut out: W,
) -> Result<Vec<ReviewDecision>> {
    let mut decisions = Vec::new();
    for entry in cb
        .entries
        .iter()
        .filter(|e| matches!(e.status, EntryStatus::Active | EntryStatus::ReviewFlagged))
    {
        writeln!(out, "\n{} [{}] {}", entry.entry_id, status_name(entry.status), entry.label)?;
        writeln!(out, "  definition: {}", entry.definition)?;
        writeln!(out, "  example:    {}", entry.example)?;
        write!(out, "accept/reject/skip [skip]? ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let decision = match line.trim().to_lowercase().as_str() {
            "a" | "accept" => ReviewAction::Accept,
            "r" | "reject" => ReviewAction::Reject,
            _ => continue,
        };
        write!(out, "note (optional)? ")?;
        out.flush()?;
        let mut note = String::new();
        input.read_line(&mut note)?;
        let note = note.trim();
        decisions.push(ReviewDecision {
            entry_id: entry.entry_id.clone(),
            decision,
            note: (!note.is_empty()).then(|| note.to_string()),
        });
    }
    Ok(decisions)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest => run_stage(load_config(cli)?, Stage::Ingest).map(drop),
        Command::Extract => run_stage(load_config(cli)?, Stage::Extract).map(drop),
        Command::Embed => run_stage(load_config(cli)?, Stage::Embed).map(drop),
        Command::Cluster => run_stage(load_config(cli)?, Stage::Cluster).map(drop),
        Command::Represent => run_stage(load_config(cli)?, Stage::Represent).map(drop),
        Command::Summarize => run_stage(load_config(cli)?, Stage::Summarize).map(drop),
        Command::Simplify => run_stage(load_config(cli)?, Stage::Simplify).map(drop),
        Command::Run => run_all(load_config(cli)?).map(drop),
        Command::Resume => resume(load_config(cli)?).map(drop),
        Command::Review { decisions } => {
            let run_dir = resolve_run_dir(cli)?;
            let decisions = match decisions {
                Some(path) => read_decisions(path)?,
                None => {
                    let cb = latest_codebook(&run_dir)?;
                    let stdin = std::io::stdin();
                    collect_interactive_decisions(&cb, stdin.lock(), std::io::stderr())?
                }
            };
            if decisions.is_empty() {
                eprintln!("[eecs] nothing to apply");
                return Ok(());
            }
            let artifact = run_review(&run_dir, &decisions)?;
            eprintln!("[eecs] review: {} events", artifact.record_count);
            Ok(())
        }
        Command::Export { format } => {
            let path = export(&resolve_run_dir(cli)?, format.parse()?)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

/// Map an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        "config" => 2,
        "backend" => 3,
        "hash-chain" => 4,
        "malformed-budget" => 5,
        _ => 1,
    }
}

/// Parse the process arguments, run the command, and return the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            exit_code(&e)
        }
    }
}
