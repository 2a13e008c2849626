//! Run configuration, the run manifest, and stage orchestration.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{
    BackendKind, BackendsConfig, ClusteringConfig, InputConfig, PipelineConfig, PromptBindings,
    ScreeningConfig,
};
pub use manifest::{RunManifest, StageRun, MANIFEST_FILE, TOOL_VERSION};
pub use run::{
    build_gateway, execute_stage, export, latest_codebook, read_decisions, resume, run_all,
    run_review, run_stage, ClusterAssignment, EmbedRecord, ExportFormat, RunContext, RunLock,
    CODEBOOK_FILE, EXTRACT_REPORT_FILE,
};
