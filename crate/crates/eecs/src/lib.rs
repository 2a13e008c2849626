//! eecs distills a corpus of short free-text responses (course evaluations,
//! survey comments, feedback forms) into a qualitative codebook. The pipeline
//! runs in content-addressed stages — ingest, extract, embed, cluster,
//! represent, summarize, simplify — each writing a JSONL artifact whose header
//! hashes the previous stage's bytes, so a run can be resumed, audited, or
//! partially re-run without silently mixing stale data.
//!
//! The heavy lifting per stage:
//! - [`corpus`] reads CSV/JSONL input and screens out junk responses,
//! - [`extraction`] asks a language model to split responses into atomic ideas,
//! - [`gateway`] talks to generation/embedding backends (HTTP, replayable
//!   mocks, or a deterministic built-in demo) with disk caching,
//! - [`cluster`] groups idea vectors with density-based hierarchical clustering,
//! - [`codebook`] turns cluster representatives into labelled, event-sourced
//!   codebook entries and then prunes and sharpens them,
//! - [`pipeline`] wires the stages together behind a manifest and run lock,
//! - [`cli`] exposes the whole thing as the `eecs` binary.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod artifact;
pub mod cli;
pub mod cluster;
pub mod codebook;
pub mod corpus;
pub mod error;
pub mod extraction;
pub mod gateway;
pub mod pipeline;
pub mod prompt;
pub mod vector;

pub use error::{Error, Result};
