use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_pipeline, LinkSet, Phase, PipelineConfig, PipelineError, Provenance, StepError};
use crate::corpus::Proposal;
use crate::jsonl::{self, JsonlError};
use crate::llm_gateway::LanguageModel;
use crate::repo_model::{CodeArtifactId, RepoSnapshot};
use crate::GranularityLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One line of `links.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRow {
    pub proposal_id: u64,
    /// Absent only when the granularity step itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<GranularityLabel>,
    pub links: Vec<CodeArtifactId>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_phase: Option<Phase>,
}

/// One line of `provenance.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRow {
    pub proposal_id: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub malformed_replies: Vec<String>,
    pub provenance: Provenance,
}

pub type BatchResult = Result<LinkSet, PipelineError>;

fn result_id(r: &BatchResult) -> u64 {
    match r {
        Ok(set) => set.proposal_id,
        Err(err) => err.proposal_id,
    }
}

/// Runs every proposal on a pool of `workers` threads. Results come back
/// sorted by proposal id whatever the completion order.
pub fn run_batch(
    proposals: &[Proposal],
    snapshot: &RepoSnapshot,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
    workers: usize,
) -> Vec<BatchResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let mut results: Vec<BatchResult> = pool.install(|| {
        proposals
            .par_iter()
            .map(|p| {
                let result = run_pipeline(p, snapshot, config, model);
                if let Err(err) = &result {
                    log::warn!("{err}");
                }
                result
            })
            .collect()
    });
    results.sort_by_key(result_id);
    results
}

impl LinkRow {
    pub fn from_result(result: &BatchResult) -> Self {
        match result {
            Ok(set) => LinkRow {
                proposal_id: set.proposal_id,
                granularity: Some(set.granularity),
                links: set.links.iter().cloned().collect(),
                status: RunStatus::Ok,
                failure_phase: None,
            },
            Err(err) => LinkRow {
                proposal_id: err.proposal_id,
                granularity: err.granularity,
                links: Vec::new(),
                status: RunStatus::Failed,
                failure_phase: Some(err.phase),
            },
        }
    }
}

impl ProvenanceRow {
    pub fn from_result(result: &BatchResult) -> Self {
        match result {
            Ok(set) => ProvenanceRow {
                proposal_id: set.proposal_id,
                status: RunStatus::Ok,
                error: None,
                malformed_replies: Vec::new(),
                provenance: set.provenance.clone(),
            },
            Err(err) => ProvenanceRow {
                proposal_id: err.proposal_id,
                status: RunStatus::Failed,
                error: Some(err.source.to_string()),
                malformed_replies: match &err.source {
                    StepError::MalformedModelOutput { replies } => replies.clone(),
                    _ => Vec::new(),
                },
                provenance: (*err.provenance).clone(),
            },
        }
    }
}

/// Writes `links.jsonl` and `provenance.jsonl` into `dir`.
pub fn write_batch_outputs(dir: &Path, results: &[BatchResult]) -> Result<(), JsonlError> {
    fs::create_dir_all(dir).map_err(|source| JsonlError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let links: Vec<LinkRow> = results.iter().map(LinkRow::from_result).collect();
    let provenance: Vec<ProvenanceRow> = results.iter().map(ProvenanceRow::from_result).collect();
    jsonl::write_jsonl(&dir.join("links.jsonl"), &links)?;
    jsonl::write_jsonl(&dir.join("provenance.jsonl"), &provenance)
}

pub fn read_link_rows(path: &Path) -> Result<Vec<LinkRow>, JsonlError> {
    jsonl::read_jsonl(path)
}
