//! Link scoring, macro aggregation, agreement and correlation statistics,
//! and report rendering.

mod report;
mod stats;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::CandidateRow;
use crate::corpus::{concat_discussion, Dataset, GroundTruth};
use crate::pipeline::{LinkRow, LinkSet, RunStatus};
use crate::repo_model::{ArtifactKind, CodeArtifactId};
use crate::GranularityLabel;

pub use report::{
    correlations_csv, emit_report, load_report_json, sweep_csv, ReportError, ReportFormat, CONVENTIONS,
};
pub use stats::{average_ranks, cohen_kappa, spearman_rho, spearman_rho_exact, Correlation, EXACT_PERMUTATION_MAX_N};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("predicted and truth ids mix artifact kinds ({0:?} and {1:?})")]
    KindMismatch(ArtifactKind, ArtifactKind),
    #[error("no scores to aggregate")]
    EmptyInput,
    #[error("proposal {0} has no label")]
    MissingLabel(u64),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("both raters use a single identical label but disagree")]
    DegenerateMarginals,
    #[error("a rank vector has zero variance")]
    DegenerateInput,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn single_kind(ids: impl IntoIterator<Item = CodeArtifactId>) -> Result<Option<ArtifactKind>, EvalError> {
    let mut kind = None;
    for id in ids {
        match kind {
            None => kind = Some(id.kind()),
            Some(k) if k != id.kind() => return Err(EvalError::KindMismatch(k, id.kind())),
            Some(_) => {}
        }
    }
    Ok(kind)
}

/// Set-based counts and ratios. Nothing predicted against nothing true
/// scores 1 across the board.
pub fn score_links(
    predicted: &BTreeSet<CodeArtifactId>,
    truth: &BTreeSet<CodeArtifactId>,
) -> Result<LinkCounts, EvalError> {
    single_kind(predicted.iter().chain(truth).cloned())?;
    if predicted.is_empty() && truth.is_empty() {
        return Ok(LinkCounts {
            tp: 0,
            fp: 0,
            fn_: 0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let tp = predicted.intersection(truth).count();
    let fp = predicted.len() - tp;
    let fn_ = truth.len() - tp;
    let precision = if predicted.is_empty() { 0.0 } else { tp as f64 / predicted.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { tp as f64 / truth.len() as f64 };
    Ok(LinkCounts {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1: harmonic_mean(precision, recall),
    })
}

fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// What one system predicted for one proposal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub proposal_id: u64,
    /// `None` when the run failed before settling on a granularity.
    pub granularity: Option<GranularityLabel>,
    pub links: BTreeSet<CodeArtifactId>,
}

impl From<&LinkSet> for Prediction {
    fn from(set: &LinkSet) -> Self {
        Prediction {
            proposal_id: set.proposal_id,
            granularity: Some(set.granularity),
            links: set.links.clone(),
        }
    }
}

impl From<&LinkRow> for Prediction {
    /// Failed rows predict nothing at no granularity.
    fn from(row: &LinkRow) -> Self {
        match row.status {
            RunStatus::Ok => Prediction {
                proposal_id: row.proposal_id,
                granularity: row.granularity,
                links: row.links.iter().cloned().collect(),
            },
            RunStatus::Failed => Prediction {
                proposal_id: row.proposal_id,
                granularity: None,
                links: BTreeSet::new(),
            },
        }
    }
}

impl From<&CandidateRow> for Prediction {
    fn from(row: &CandidateRow) -> Self {
        Prediction {
            proposal_id: row.proposal_id,
            granularity: Some(row.granularity),
            links: row.ids(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerProposalScores {
    pub proposal_id: u64,
    pub ga: u8,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted_granularity: Option<GranularityLabel>,
    pub truth_granularity: GranularityLabel,
}

/// Scores one prediction. A granularity mismatch zeroes every ratio and
/// counts all predicted links as false positives.
pub fn score_proposal(prediction: &Prediction, truth: &GroundTruth) -> Result<PerProposalScores, EvalError> {
    let mut scores = PerProposalScores {
        proposal_id: prediction.proposal_id,
        ga: 0,
        tp: 0,
        fp: prediction.links.len(),
        fn_: truth.links.len(),
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        predicted_granularity: prediction.granularity,
        truth_granularity: truth.granularity,
    };
    if prediction.granularity == Some(truth.granularity) {
        let c = score_links(&prediction.links, &truth.links)?;
        scores.ga = 1;
        scores.tp = c.tp;
        scores.fp = c.fp;
        scores.fn_ = c.fn_;
        scores.precision = c.precision;
        scores.recall = c.recall;
        scores.f1 = c.f1;
    }
    Ok(scores)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredRun {
    pub scores: Vec<PerProposalScores>,
    /// Predictions for proposals without a truth record.
    pub without_truth: Vec<u64>,
    /// Truth records with no prediction.
    pub without_prediction: Vec<u64>,
}

/// Which truth record a prediction is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruthSelection {
    /// The proposal's primary record; granularity accuracy is meaningful.
    #[default]
    Primary,
    /// The record at the predicted granularity, for fixed-granularity
    /// systems such as the retrieval baseline.
    AtPredictedGranularity,
}

/// Scores every prediction against its selected truth record.
pub fn score_predictions(
    predictions: &[Prediction],
    dataset: &Dataset,
    selection: TruthSelection,
) -> Result<ScoredRun, EvalError> {
    let mut run = ScoredRun::default();
    let predicted: BTreeSet<u64> = predictions.iter().map(|p| p.proposal_id).collect();
    for p in predictions {
        let truth = match selection {
            TruthSelection::Primary => dataset.primary_truth(p.proposal_id),
            TruthSelection::AtPredictedGranularity => p.granularity.and_then(|g| dataset.truth_at(p.proposal_id, g)),
        };
        match truth {
            Some(truth) => run.scores.push(score_proposal(p, truth)?),
            None => run.without_truth.push(p.proposal_id),
        }
    }
    let truth_ids: BTreeSet<u64> = dataset.ground_truths.iter().map(|g| g.proposal_id).collect();
    run.without_prediction = truth_ids.difference(&predicted).copied().collect();
    run.scores.sort_by_key(|s| s.proposal_id);
    run.without_truth.sort_unstable();
    Ok(run)
}

/// Mean metrics over one group of proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub group: String,
    pub n: usize,
    pub ga: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn means<'a>(group: &str, scores: impl IntoIterator<Item = &'a PerProposalScores>) -> GroupMeans {
    let mut m = GroupMeans {
        group: group.to_string(),
        n: 0,
        ga: 0.0,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    for s in scores {
        m.n += 1;
        m.ga += s.ga as f64;
        m.precision += s.precision;
        m.recall += s.recall;
        m.f1 += s.f1;
    }
    if m.n > 0 {
        let n = m.n as f64;
        m.ga /= n;
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
    }
    m
}

pub const OVERALL_GROUP: &str = "overall";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    /// Truth granularities that occur, in directory, file, function order.
    pub by_granularity: Vec<GroupMeans>,
    pub overall: GroupMeans,
}

impl AggregateReport {
    pub fn group(&self, granularity: GranularityLabel) -> Option<&GroupMeans> {
        self.by_granularity.iter().find(|g| g.group == granularity.as_str())
    }

    /// Granularity rows followed by the overall row.
    pub fn rows(&self) -> Vec<GroupMeans> {
        let mut rows = self.by_granularity.clone();
        rows.push(self.overall.clone());
        rows
    }
}

/// Macro averages keyed by truth granularity, plus the overall mean.
pub fn macro_aggregate(scores: &[PerProposalScores]) -> Result<AggregateReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let by_granularity = GranularityLabel::ALL
        .iter()
        .map(|&g| means(g.as_str(), scores.iter().filter(|s| s.truth_granularity == g)))
        .filter(|m| m.n > 0)
        .collect();
    Ok(AggregateReport {
        by_granularity,
        overall: means(OVERALL_GROUP, scores),
    })
}

/// Mean metrics per label value, ordered bytewise by value.
pub fn group_by_label(
    scores: &[PerProposalScores],
    labels: &BTreeMap<u64, String>,
) -> Result<Vec<GroupMeans>, EvalError> {
    let mut groups: BTreeMap<&str, Vec<&PerProposalScores>> = BTreeMap::new();
    for s in scores {
        let label = labels.get(&s.proposal_id).ok_or(EvalError::MissingLabel(s.proposal_id))?;
        groups.entry(label.as_str()).or_default().push(s);
    }
    Ok(groups.into_iter().map(|(label, members)| means(label, members)).collect())
}

/// Localization quality of one k in a baseline sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Candidate sets scored against the truth at the index's granularity,
/// one point per k. Proposals without such a truth record are skipped.
pub fn sweep_scores(rows: &[CandidateRow], dataset: &Dataset) -> Result<Vec<SweepPoint>, EvalError> {
    let mut by_k: BTreeMap<usize, Vec<LinkCounts>> = BTreeMap::new();
    for row in rows {
        if let Some(truth) = dataset.truth_at(row.proposal_id, row.granularity) {
            by_k.entry(row.k).or_default().push(score_links(&row.ids(), &truth.links)?);
        }
    }
    Ok(by_k
        .into_iter()
        .map(|(k, counts)| {
            let n = counts.len() as f64;
            SweepPoint {
                k,
                n: counts.len(),
                precision: counts.iter().map(|c| c.precision).sum::<f64>() / n,
                recall: counts.iter().map(|c| c.recall).sum::<f64>() / n,
                f1: counts.iter().map(|c| c.f1).sum::<f64>() / n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    #[default]
    TApproximation,
    ExactPermutation,
}

/// Correlation between discussion length and one metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub metric: String,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_two_sided: Option<f64>,
    pub method: PValueMethod,
    /// Why no value was computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Spearman correlation of discussion length (whitespace tokens of the
/// rendered thread) with precision, recall and F1.
pub fn length_correlations(
    scores: &[PerProposalScores],
    dataset: &Dataset,
    method: PValueMethod,
) -> Vec<CorrelationRow> {
    let (lengths, kept): (Vec<f64>, Vec<&PerProposalScores>) = scores
        .iter()
        .filter_map(|s| dataset.proposal(s.proposal_id).map(|p| (concat_discussion(p).length as f64, s)))
        .unzip();
    let metrics: [(&str, fn(&PerProposalScores) -> f64); 3] =
        [("precision", |s| s.precision), ("recall", |s| s.recall), ("f1", |s| s.f1)];
    metrics
        .iter()
        .map(|(name, get)| {
            let values: Vec<f64> = kept.iter().map(|s| get(s)).collect();
            let result = match method {
                PValueMethod::TApproximation => spearman_rho(&lengths, &values),
                PValueMethod::ExactPermutation => spearman_rho_exact(&lengths, &values),
            };
            let (rho, p, note) = match result {
                Ok(c) => (Some(c.rho), Some(c.p_two_sided), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            CorrelationRow {
                metric: name.to_string(),
                n: values.len(),
                rho,
                p_two_sided: p,
                method,
                note,
            }
        })
        .collect()
}
