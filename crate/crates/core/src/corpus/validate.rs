use std::collections::BTreeMap;

use serde::Serialize;

use super::Dataset;
use crate::repo_model::RepoSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingClass {
    UnknownArtifact,
    KindMismatch,
    MissingTruth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub proposal_id: u64,
    pub class: FindingClass,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    pub counts: BTreeMap<FindingClass, usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, proposal_id: u64, class: FindingClass, detail: String) {
        *self.counts.entry(class).or_default() += 1;
        self.findings.push(Finding { proposal_id, class, detail });
    }
}

/// Cross-checks a dataset against a snapshot.
pub fn validate_dataset(dataset: &Dataset, snapshot: &RepoSnapshot) -> ValidationReport {
    let mut report = ValidationReport::default();
    for gt in &dataset.ground_truths {
        for link in &gt.links {
            if link.kind() != gt.granularity.artifact_kind() {
                report.push(gt.proposal_id, FindingClass::KindMismatch, format!("{link} is not a {}", gt.granularity));
            } else if !snapshot.contains(link) {
                report.push(gt.proposal_id, FindingClass::UnknownArtifact, link.to_string());
            }
        }
    }
    for p in &dataset.proposals {
        if dataset.truths_for(p.id).next().is_none() {
            report.push(p.id, FindingClass::MissingTruth, "no ground-truth record".to_string());
        }
    }
    report
}
