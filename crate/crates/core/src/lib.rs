//! Granularity-aware traceability between proposal discussions and the
//! directories, files, and functions of a Go codebase.

mod granularity;
pub mod repo_model;

pub use granularity::{GranularityLabel, UnknownGranularity};
pub mod corpus;
pub mod jsonl;
pub mod llm_gateway;
pub mod pipeline;
pub mod baseline;
pub mod eval;
