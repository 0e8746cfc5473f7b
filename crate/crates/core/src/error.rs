//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("repository root does not exist: {0}")]
    RootMissing(PathBuf),

    #[error("duplicate skill id after lowercasing: {0}")]
    DuplicateSkill(String),

    #[error("skill id contains a path separator: {0}")]
    InvalidSkillId(String),

    #[error("repository contains no skills; refusing to build an empty index")]
    EmptyRepository,

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("embedding provider failed for batch indices {first}..{last}: {message}")]
    EmbeddingBatch {
        first: usize,
        last: usize,
        message: String,
    },

    #[error("invalid embedding provider config: {0}")]
    ProviderConfig(String),

    #[error("non-finite value in embeddings; refusing to cluster")]
    NonFiniteEmbedding,

    #[error("index version mismatch: file has v{found}, this build reads v{expected}; re-index required")]
    IndexVersion { found: u32, expected: u32 },

    #[error("corrupt index: {0}")]
    IndexCorrupt(String),

    #[error("subunit id collision between distinct texts: {0}")]
    SubunitIdCollision(String),

    #[error("task text must be non-empty")]
    EmptyTask,

    #[error("context budget infeasible: task and skill sections need {required} tokens, budget is {budget}")]
    BudgetInfeasible { required: usize, budget: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown eval variant: {0}")]
    UnknownVariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
