//! Retrieval baseline: preprocess text, index every artifact of one
//! granularity, rank by cosine similarity, and optionally run the yes/no
//! link decision over the top candidates.

mod index;
mod preprocess;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::corpus::{concat_discussion, Proposal};
use crate::jsonl::{self, JsonlError};
use crate::llm_gateway::{EmbeddingClient, GatewayError, LanguageModel};
use crate::pipeline::{decide_link, element_text, PipelineConfig, StepError};
use crate::repo_model::{CodeArtifactId, RepoSnapshot};
use crate::GranularityLabel;

pub use index::{artifact_documents, cosine, ScoredArtifact, SparseVector, VectorIndex, Weighting};
pub use preprocess::{is_stopword, preprocess_text, split_identifier, stem, stem_once};

pub const DEFAULT_K: usize = 20;
pub const DEFAULT_K_SWEEP: [usize; 7] = [1, 5, 10, 20, 30, 40, 50];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("index has no documents")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("link decision for {artifact}: {source}")]
    LinkDecision { artifact: CodeArtifactId, source: StepError },
    #[error("directories have no element text for a link decision")]
    NoElementText,
}

/// Builds the index for one granularity. `External` needs an embedding client.
pub fn build_index(
    snapshot: &RepoSnapshot,
    granularity: GranularityLabel,
    weighting: Weighting,
    embeddings: Option<Arc<EmbeddingClient>>,
) -> Result<VectorIndex, BaselineError> {
    let docs = artifact_documents(snapshot, granularity);
    match weighting {
        Weighting::TfIdf => Ok(VectorIndex::tfidf(granularity, docs)),
        Weighting::External => {
            let client = embeddings
                .ok_or_else(|| GatewayError::Config("external weighting needs an embedding endpoint".into()))?;
            VectorIndex::external(granularity, docs, client)
        }
    }
}

/// The `k` most similar artifacts, best first; ties go to the bytewise
/// smaller id. Returns fewer than `k` when the index is smaller.
pub fn retrieve_topk(index: &VectorIndex, proposal_tokens: &[String], k: usize) -> Result<Vec<ScoredArtifact>, BaselineError> {
    if k == 0 {
        return Err(BaselineError::InvalidK);
    }
    if index.is_empty() {
        return Err(BaselineError::EmptyIndex);
    }
    let query = index.query_vector(proposal_tokens)?;
    let mut ranked = index.rank(&query);
    ranked.truncate(k);
    Ok(ranked)
}

pub fn proposal_tokens(proposal: &Proposal) -> Vec<String> {
    preprocess_text(&concat_discussion(proposal).text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub proposal_id: u64,
    pub granularity: GranularityLabel,
    pub k: usize,
    pub candidates: Vec<ScoredArtifact>,
    /// Present only when the link decision ran.
    pub links: Option<BTreeSet<CodeArtifactId>>,
}

impl BaselineRun {
    pub fn candidate_ids(&self) -> BTreeSet<CodeArtifactId> {
        self.candidates.iter().map(|c| c.id.clone()).collect()
    }
}

/// Localization by retrieval, then (optionally) a yes/no per candidate.
/// Without the link decision no model is called.
pub fn run_baseline(
    proposal: &Proposal,
    snapshot: &RepoSnapshot,
    index: &VectorIndex,
    k: usize,
    link_decision: Option<(&PipelineConfig, &dyn LanguageModel)>,
) -> Result<BaselineRun, BaselineError> {
    let candidates = retrieve_topk(index, &proposal_tokens(proposal), k)?;
    let links = match link_decision {
        None => None,
        Some((config, model)) => {
            let mut links = BTreeSet::new();
            for c in &candidates {
                let text = element_text(snapshot, &c.id).ok_or(BaselineError::NoElementText)?;
                let relevant = decide_link(proposal, &c.id, &text, config, model).map_err(|source| {
                    BaselineError::LinkDecision {
                        artifact: c.id.clone(),
                        source,
                    }
                })?;
                if relevant {
                    links.insert(c.id.clone());
                }
            }
            Some(links)
        }
    };
    Ok(BaselineRun {
        proposal_id: proposal.id,
        granularity: index.granularity(),
        k,
        candidates,
        links,
    })
}

/// One ranked list per k. Each list is a prefix of the largest, so
/// candidate sets grow with k.
pub fn sweep_k(
    proposal: &Proposal,
    index: &VectorIndex,
    ks: &[usize],
) -> Result<Vec<BaselineRun>, BaselineError> {
    let Some(&max_k) = ks.iter().max() else {
        return Ok(Vec::new());
    };
    let ranked = retrieve_topk(index, &proposal_tokens(proposal), max_k)?;
    Ok(ks
        .iter()
        .map(|&k| BaselineRun {
            proposal_id: proposal.id,
            granularity: index.granularity(),
            k,
            candidates: ranked.iter().take(k).cloned().collect(),
            links: None,
        })
        .collect())
}

/// Score rendered with exactly six decimals.
pub fn format_score(score: f64) -> String {
    let s = format!("{score:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

#[derive(Debug, Serialize)]
struct RankedOut {
    id: String,
    score: Box<RawValue>,
}

#[derive(Debug, Serialize)]
struct CandidateRowOut {
    proposal_id: u64,
    k: usize,
    granularity: GranularityLabel,
    ranked: Vec<RankedOut>,
}

/// One line of `candidates.jsonl` as read back.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CandidateRow {
    pub proposal_id: u64,
    pub k: usize,
    pub granularity: GranularityLabel,
    pub ranked: Vec<RankedEntry>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RankedEntry {
    pub id: CodeArtifactId,
    pub score: f64,
}

impl CandidateRow {
    pub fn ids(&self) -> BTreeSet<CodeArtifactId> {
        self.ranked.iter().map(|r| r.id.clone()).collect()
    }
}

pub fn candidates_jsonl(runs: &[BaselineRun]) -> Result<String, JsonlError> {
    let mut sorted: Vec<&BaselineRun> = runs.iter().collect();
    sorted.sort_by_key(|r| (r.proposal_id, r.k));
    let rows = sorted
        .into_iter()
        .map(|run| {
            let ranked = run
                .candidates
                .iter()
                .map(|c| {
                    Ok(RankedOut {
                        id: c.id.to_string(),
                        score: RawValue::from_string(format_score(c.score))?,
                    })
                })
                .collect::<Result<Vec<_>, serde_json::Error>>()?;
            Ok(CandidateRowOut {
                proposal_id: run.proposal_id,
                k: run.k,
                granularity: run.granularity,
                ranked,
            })
        })
        .collect::<Result<Vec<_>, serde_json::Error>>()?;
    jsonl::to_jsonl(&rows)
}

pub fn write_candidates(path: &Path, runs: &[BaselineRun]) -> Result<(), JsonlError> {
    let text = candidates_jsonl(runs)?;
    std::fs::write(path, text).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateRow>, JsonlError> {
    jsonl::read_jsonl(path)
}

#[cfg(test)]
mod tests;
