use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::preprocess_text;
use super::BaselineError;
use crate::llm_gateway::EmbeddingClient;
use crate::repo_model::{ArtifactKind, CodeArtifactId, RepoSnapshot};
use crate::GranularityLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[serde(rename = "tfidf")]
    TfIdf,
    External,
}

/// Sparse vector: (dimension, weight) pairs sorted by dimension.
pub type SparseVector = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredArtifact {
    pub id: CodeArtifactId,
    pub score: f64,
}

enum QueryModel {
    TfIdf { idf: Vec<f64> },
    External { client: Arc<EmbeddingClient> },
}

/// Immutable document vectors for every artifact of one granularity.
pub struct VectorIndex {
    granularity: GranularityLabel,
    vocabulary: BTreeMap<String, usize>,
    docs: Vec<(CodeArtifactId, SparseVector)>,
    query: QueryModel,
}

fn l2_normalize(v: &mut SparseVector) {
    let norm = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in v.iter_mut() {
            *w /= norm;
        }
    }
}

fn dot(a: &SparseVector, b: &SparseVector) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

fn term_counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Preprocessed text of every artifact at `granularity`, in id order.
/// Directory documents are the concatenation of all files beneath them.
pub fn artifact_documents(snapshot: &RepoSnapshot, granularity: GranularityLabel) -> Vec<(CodeArtifactId, Vec<String>)> {
    match granularity.artifact_kind() {
        ArtifactKind::File | ArtifactKind::Directory => {
            let files: Vec<(CodeArtifactId, Vec<String>)> = snapshot
                .files()
                .iter()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|f| ((*f).clone(), preprocess_text(snapshot.file_content(f).unwrap_or_default())))
                .collect();
            if granularity == GranularityLabel::File {
                return files;
            }
            snapshot
                .directories()
                .iter()
                .map(|dir| {
                    let tokens = files
                        .iter()
                        .filter(|(f, _)| f.is_within(dir))
                        .flat_map(|(_, t)| t.iter().cloned())
                        .collect();
                    (dir.clone(), tokens)
                })
                .collect()
        }
        ArtifactKind::Function => {
            let mut sigs: Vec<_> = snapshot.all_functions().collect();
            sigs.sort_by(|a, b| a.id().cmp(&b.id()));
            sigs.dedup_by_key(|s| s.id());
            sigs.par_iter()
                .map(|sig| (sig.id(), preprocess_text(&snapshot.function_source(sig).unwrap_or_default())))
                .collect()
        }
    }
}

impl VectorIndex {
    /// TF-IDF index: weight = tf × ln(N/df), each vector L2-normalized.
    pub fn tfidf(granularity: GranularityLabel, documents: Vec<(CodeArtifactId, Vec<String>)>) -> Self {
        let n = documents.len() as f64;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        let counts: Vec<HashMap<&str, usize>> = documents.iter().map(|(_, t)| term_counts(t)).collect();
        for c in &counts {
            for term in c.keys() {
                *df.entry((*term).to_string()).or_insert(0) += 1;
            }
        }
        let vocabulary: BTreeMap<String, usize> = df.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let idf: Vec<f64> = df.values().map(|&d| (n / d as f64).ln()).collect();
        let docs = documents
            .iter()
            .zip(&counts)
            .map(|((id, _), c)| {
                let mut v: SparseVector = c
                    .iter()
                    .map(|(t, &tf)| {
                        let dim = vocabulary[*t];
                        (dim, tf as f64 * idf[dim])
                    })
                    .filter(|&(_, w)| w != 0.0)
                    .collect();
                v.sort_by_key(|&(d, _)| d);
                l2_normalize(&mut v);
                (id.clone(), v)
            })
            .collect();
        VectorIndex {
            granularity,
            vocabulary,
            docs,
            query: QueryModel::TfIdf { idf },
        }
    }

    /// Dense embeddings of each document's preprocessed text, normalized.
    pub fn external(
        granularity: GranularityLabel,
        documents: Vec<(CodeArtifactId, Vec<String>)>,
        client: Arc<EmbeddingClient>,
    ) -> Result<Self, BaselineError> {
        let texts: Vec<String> = documents.iter().map(|(_, t)| t.join(" ")).collect();
        let mut vectors = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(64) {
            vectors.extend(client.embed(chunk)?);
        }
        let docs = documents
            .into_iter()
            .zip(vectors)
            .map(|((id, _), dense)| (id, dense_to_sparse(dense)))
            .collect();
        Ok(VectorIndex {
            granularity,
            vocabulary: BTreeMap::new(),
            docs,
            query: QueryModel::External { client },
        })
    }

    pub fn granularity(&self) -> GranularityLabel {
        self.granularity
    }

    pub fn weighting(&self) -> Weighting {
        match self.query {
            QueryModel::TfIdf { .. } => Weighting::TfIdf,
            QueryModel::External { .. } => Weighting::External,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn documents(&self) -> impl Iterator<Item = (&CodeArtifactId, &SparseVector)> {
        self.docs.iter().map(|(id, v)| (id, v))
    }

    pub fn vector(&self, id: &CodeArtifactId) -> Option<&SparseVector> {
        self.docs.iter().find(|(d, _)| d == id).map(|(_, v)| v)
    }

    /// Query vector in this index's space. Terms outside the vocabulary
    /// are ignored.
    pub fn query_vector(&self, tokens: &[String]) -> Result<SparseVector, BaselineError> {
        let mut v: SparseVector = match &self.query {
            QueryModel::TfIdf { idf } => term_counts(tokens)
                .into_iter()
                .filter_map(|(t, tf)| self.vocabulary.get(t).map(|&dim| (dim, tf as f64 * idf[dim])))
                .filter(|&(_, w)| w != 0.0)
                .collect(),
            QueryModel::External { client } => {
                let mut out = client.embed(&[tokens.join(" ")])?;
                dense_to_sparse(out.pop().unwrap_or_default())
            }
        };
        v.sort_by_key(|&(d, _)| d);
        l2_normalize(&mut v);
        Ok(v)
    }

    /// Every document scored against `query`, best first, ties by id.
    pub fn rank(&self, query: &SparseVector) -> Vec<ScoredArtifact> {
        let mut scored: Vec<ScoredArtifact> = self
            .docs
            .iter()
            .map(|(id, v)| ScoredArtifact {
                id: id.clone(),
                score: dot(query, v),
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        scored
    }
}

fn dense_to_sparse(dense: Vec<f64>) -> SparseVector {
    let mut v: SparseVector = dense.into_iter().enumerate().filter(|&(_, w)| w != 0.0).collect();
    l2_normalize(&mut v);
    v
}

pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
