//! Ground truth for accepted proposals from merged code-review changes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use log::debug;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, LabelSource, Proposal, ProposalStatus};
use crate::repo_model::{CodeArtifactId, RepoSnapshot};
use crate::GranularityLabel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum GerritStatus {
    Merged,
    Other(String),
}

impl From<String> for GerritStatus {
    fn from(s: String) -> Self {
        if s == "MERGED" {
            GerritStatus::Merged
        } else {
            GerritStatus::Other(s)
        }
    }
}

impl From<GerritStatus> for String {
    fn from(s: GerritStatus) -> Self {
        match s {
            GerritStatus::Merged => "MERGED".to_string(),
            GerritStatus::Other(other) => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GerritChange {
    pub change_key: String,
    pub status: GerritStatus,
    pub commit_message: String,
    pub changed_files: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Also accept issue URLs (`github.com/golang/go/issues/N`, `go.dev/issue/N`).
    #[serde(default)]
    pub match_issue_urls: bool,
}

static HASH_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#(\d+)").unwrap());
static ISSUE_URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:github\.com/golang/go/issues|golang\.org/issues?|go\.dev/issues?)/(\d+)").unwrap()
});

fn mentioned_ids(message: &str, options: MatchOptions) -> BTreeSet<u64> {
    // `\d+` is greedy, so each capture is a maximal digit run: "#1234" never
    // yields 123.
    let mut ids: BTreeSet<u64> = HASH_REF
        .captures_iter(message)
        .filter_map(|c| c[1].parse().ok())
        .collect();
    if options.match_issue_urls {
        ids.extend(ISSUE_URL.captures_iter(message).filter_map(|c| c[1].parse::<u64>().ok()));
    }
    ids
}

/// Whether a commit message refers to proposal `id` as `#<id>`.
pub fn mentions_proposal(message: &str, id: u64, options: MatchOptions) -> bool {
    mentioned_ids(message, options).contains(&id)
}

fn normalize_path(path: &str) -> String {
    path.trim().trim_start_matches("./").to_string()
}

/// File-level truth from merged changes that cite an accepted proposal, plus
/// the directory-level truth formed by those files' parent directories.
/// Only `.go` files present in the snapshot are kept.
pub fn extract_ground_truth(
    changes: &[GerritChange],
    proposals: &[Proposal],
    snapshot: &RepoSnapshot,
    options: MatchOptions,
) -> Vec<GroundTruth> {
    let mut by_id: BTreeMap<u64, Vec<&GerritChange>> = BTreeMap::new();
    for change in changes {
        if change.status != GerritStatus::Merged {
            debug!("skip change {}: status {:?}", change.change_key, change.status);
            continue;
        }
        let ids = mentioned_ids(&change.commit_message, options);
        if ids.is_empty() {
            debug!("skip change {}: no proposal reference", change.change_key);
        }
        for id in ids {
            by_id.entry(id).or_default().push(change);
        }
    }

    let mut accepted: Vec<&Proposal> = proposals.iter().filter(|p| p.status == ProposalStatus::Accepted).collect();
    accepted.sort_by_key(|p| p.id);
    let mut truths = Vec::new();
    for proposal in accepted {
        let mut files = BTreeSet::new();
        for change in by_id.get(&proposal.id).into_iter().flatten() {
            for raw in &change.changed_files {
                let path = normalize_path(raw);
                if !path.ends_with(".go") {
                    continue;
                }
                match CodeArtifactId::file(&path) {
                    Ok(id) if snapshot.files().contains(&id) => {
                        files.insert(id);
                    }
                    _ => debug!("skip {path} from change {}: not in snapshot", change.change_key),
                }
            }
        }
        if files.is_empty() {
            debug!("proposal {}: no matched files", proposal.id);
            continue;
        }
        let dirs: BTreeSet<CodeArtifactId> = files.iter().filter_map(CodeArtifactId::parent_dir).collect();
        truths.push(GroundTruth {
            proposal_id: proposal.id,
            granularity: GranularityLabel::Directory,
            links: dirs,
            label_source: LabelSource::GerritDerived,
        });
        truths.push(GroundTruth {
            proposal_id: proposal.id,
            granularity: GranularityLabel::File,
            links: files,
            label_source: LabelSource::GerritDerived,
        });
    }
    truths
}
