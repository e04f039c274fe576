//! Proposal threads, ground-truth link sets, and their on-disk formats.

mod gerrit;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};
use crate::repo_model::CodeArtifactId;
use crate::GranularityLabel;

pub use gerrit::{extract_ground_truth, mentions_proposal, GerritChange, GerritStatus, MatchOptions};
pub use validate::{validate_dataset, Finding, FindingClass, ValidationReport};

pub const PROPOSALS_FILE: &str = "proposals.jsonl";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";
pub const AUX_LABELS_FILE: &str = "aux_labels.jsonl";
pub const META_FILE: &str = "dataset.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("validation: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalStatus {
    Accepted,
    Declined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub author: String,
    pub body: String,
    pub created_at: DateTime<FixedOffset>,
}

/// One discussion thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub title: String,
    pub status: ProposalStatus,
    pub messages: Vec<Message>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelSource {
    #[serde(rename = "manual")]
    Manual,
    #[serde(rename = "gerrit")]
    GerritDerived,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub proposal_id: u64,
    pub granularity: GranularityLabel,
    pub links: BTreeSet<CodeArtifactId>,
    #[serde(rename = "source")]
    pub label_source: LabelSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxLabel {
    pub proposal_id: u64,
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct DatasetMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repo_commit: Option<String>,
}

/// Proposals plus their labels, ordered by proposal id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub repo_commit: Option<String>,
    pub proposals: Vec<Proposal>,
    pub ground_truths: Vec<GroundTruth>,
    /// proposal id → label name → value (e.g. `explicitness` → `L2`).
    pub aux_labels: BTreeMap<u64, BTreeMap<String, String>>,
}

/// Aux label consulted when a proposal has truth records at several levels.
pub const GRANULARITY_LABEL: &str = "granularity";

impl Dataset {
    /// Sorts every collection and checks cross-record invariants.
    pub fn new(
        repo_commit: Option<String>,
        mut proposals: Vec<Proposal>,
        mut ground_truths: Vec<GroundTruth>,
        aux: Vec<AuxLabel>,
    ) -> Result<Self, CorpusError> {
        proposals.sort_by_key(|p| p.id);
        ground_truths.sort_by_key(|g| (g.proposal_id, g.granularity));
        let mut aux_labels: BTreeMap<u64, BTreeMap<String, String>> = BTreeMap::new();
        for label in aux {
            aux_labels.entry(label.proposal_id).or_default().insert(label.label, label.value);
        }
        let dataset = Dataset {
            repo_commit,
            proposals,
            ground_truths,
            aux_labels,
        };
        dataset.check()?;
        Ok(dataset)
    }

    fn check(&self) -> Result<(), CorpusError> {
        let fail = |msg: String| Err(CorpusError::Validation(msg));
        let mut ids = HashSet::new();
        for p in &self.proposals {
            if p.id == 0 {
                return fail("proposal id must be positive".into());
            }
            if !ids.insert(p.id) {
                return fail(format!("duplicate proposal id {}", p.id));
            }
            if p.messages.is_empty() {
                return fail(format!("proposal {} has no messages", p.id));
            }
        }
        let mut seen = HashSet::new();
        for gt in &self.ground_truths {
            if !ids.contains(&gt.proposal_id) {
                return fail(format!("ground truth references unknown proposal {}", gt.proposal_id));
            }
            if !seen.insert((gt.proposal_id, gt.granularity)) {
                return fail(format!("duplicate {} ground truth for proposal {}", gt.granularity, gt.proposal_id));
            }
            if let Some(bad) = gt.links.iter().find(|l| l.kind() != gt.granularity.artifact_kind()) {
                return fail(format!("proposal {}: link {bad} is not a {}", gt.proposal_id, gt.granularity));
            }
            if gt.label_source == LabelSource::GerritDerived && gt.links.is_empty() {
                return fail(format!("proposal {}: gerrit-derived truth has no links", gt.proposal_id));
            }
        }
        if let Some(id) = self.aux_labels.keys().find(|id| !ids.contains(id)) {
            return fail(format!("aux label references unknown proposal {id}"));
        }
        Ok(())
    }

    pub fn proposal(&self, id: u64) -> Option<&Proposal> {
        self.proposals.binary_search_by_key(&id, |p| p.id).ok().map(|i| &self.proposals[i])
    }

    pub fn truths_for(&self, id: u64) -> impl Iterator<Item = &GroundTruth> {
        self.ground_truths.iter().filter(move |g| g.proposal_id == id)
    }

    /// The truth record a proposal is scored against: the only record, or
    /// the one matching the proposal's `granularity` aux label.
    pub fn primary_truth(&self, id: u64) -> Option<&GroundTruth> {
        let truths: Vec<_> = self.truths_for(id).collect();
        match truths.as_slice() {
            [] => None,
            [only] => Some(*only),
            many => {
                let wanted: GranularityLabel = self.aux_labels.get(&id)?.get(GRANULARITY_LABEL)?.parse().ok()?;
                many.iter().copied().find(|g| g.granularity == wanted)
            }
        }
    }

    pub fn truth_at(&self, id: u64, granularity: GranularityLabel) -> Option<&GroundTruth> {
        self.truths_for(id).find(|g| g.granularity == granularity)
    }

    /// Label values for one label name, keyed by proposal id.
    pub fn label_map(&self, label: &str) -> BTreeMap<u64, String> {
        self.aux_labels
            .iter()
            .filter_map(|(id, labels)| labels.get(label).map(|v| (*id, v.clone())))
            .collect()
    }

    pub fn label_names(&self) -> BTreeSet<String> {
        self.aux_labels.values().flat_map(|m| m.keys().cloned()).collect()
    }

    fn aux_records(&self) -> Vec<AuxLabel> {
        self.aux_labels
            .iter()
            .flat_map(|(id, labels)| {
                labels.iter().map(move |(label, value)| AuxLabel {
                    proposal_id: *id,
                    label: label.clone(),
                    value: value.clone(),
                })
            })
            .collect()
    }
}

/// Loads `proposals.jsonl` and, when present, `ground_truth.jsonl`,
/// `aux_labels.jsonl`, and `dataset.json` from a directory.
pub fn load_dataset(dir: &Path) -> Result<Dataset, CorpusError> {
    let proposals = jsonl::read_jsonl(&dir.join(PROPOSALS_FILE))?;
    let optional = |name: &str| dir.join(name).is_file().then(|| dir.join(name));
    let ground_truths = match optional(GROUND_TRUTH_FILE) {
        Some(path) => jsonl::read_jsonl(&path)?,
        None => Vec::new(),
    };
    let aux = match optional(AUX_LABELS_FILE) {
        Some(path) => jsonl::read_jsonl(&path)?,
        None => Vec::new(),
    };
    let meta: DatasetMeta = match optional(META_FILE) {
        Some(path) => {
            let text = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
                path: path.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| CorpusError::Validation(format!("{}: {e}", path.display())))?
        }
        None => DatasetMeta::default(),
    };
    Dataset::new(meta.repo_commit, proposals, ground_truths, aux)
}

/// Writes the dataset in canonical order; `load_dataset` reads it back
/// unchanged.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    jsonl::write_jsonl(&dir.join(PROPOSALS_FILE), &dataset.proposals)?;
    jsonl::write_jsonl(&dir.join(GROUND_TRUTH_FILE), &dataset.ground_truths)?;
    jsonl::write_jsonl(&dir.join(AUX_LABELS_FILE), &dataset.aux_records())?;
    if dataset.repo_commit.is_some() {
        let meta = DatasetMeta {
            repo_commit: dataset.repo_commit.clone(),
        };
        let path = dir.join(META_FILE);
        fs::write(&path, serde_json::to_string(&meta).map_err(JsonlError::from)?).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discussion {
    pub text: String,
    /// Whitespace-delimited tokens of `text`.
    pub length: usize,
}

/// Canonical text of a thread: the title line, then every message as
/// `--- <author> ---` followed by its body.
pub fn concat_discussion(proposal: &Proposal) -> Discussion {
    let mut text = String::new();
    let _ = writeln!(text, "{}", proposal.title);
    for msg in &proposal.messages {
        let _ = write!(text, "--- {} ---\n{}\n", msg.author, msg.body);
    }
    let length = text.split_whitespace().count();
    Discussion { text, length }
}
