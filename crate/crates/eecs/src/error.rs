//! Crate-wide error type and result alias.

use crate::prompt::MalformedResponse;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the pipeline can surface. The CLI maps each variant
/// to a stable exit code (see `cli::exit_code`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad configuration: unknown keys, invalid parameter combinations.
    #[error("config: {0}")]
    Config(String),

    /// Bad input data: unreadable rows, missing fields, bad arguments.
    #[error("input: {0}")]
    Input(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Generation/embedding backend failures after retries.
    #[error("backend: {0}")]
    Backend(String),

    /// A stage artifact's upstream hash no longer matches the upstream file.
    #[error("hash chain: {0}")]
    HashChain(String),

    /// A stage artifact that should exist does not.
    #[error("not found: {0}")]
    NotFound(String),

    /// A model response could not be parsed into the expected structure.
    #[error("{0}")]
    Malformed(#[from] MalformedResponse),

    /// Too many malformed responses to produce any usable output.
    #[error("malformed response budget exceeded: {0}")]
    MalformedBudget(String),
}

impl Error {
    /// Short machine-readable kind used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Io(_) => "io",
            Error::Backend(_) => "backend",
            Error::HashChain(_) => "hash-chain",
            Error::NotFound(_) => "not-found",
            Error::Malformed(_) => "malformed",
            Error::MalformedBudget(_) => "malformed-budget",
        }
    }
}
