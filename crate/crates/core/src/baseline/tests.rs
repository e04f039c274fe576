use std::sync::Mutex;

use chrono::DateTime;
use proptest::prelude::*;

use super::*;
use crate::corpus::{Message, ProposalStatus};
use crate::llm_gateway::{HttpResponse, HttpTransport, ScriptedModel, TransportFailure};
use crate::repo_model::parse_artifact_id;

fn id(s: &str) -> CodeArtifactId {
    parse_artifact_id(s).unwrap()
}

fn toks(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn docs(pairs: &[(&str, &[&str])]) -> Vec<(CodeArtifactId, Vec<String>)> {
    pairs.iter().map(|(i, t)| (id(i), toks(t))).collect()
}

fn proposal(body: &str) -> Proposal {
    Proposal {
        id: 5,
        title: "proposal".into(),
        status: ProposalStatus::Declined,
        messages: vec![Message {
            author: "u".into(),
            body: body.into(),
            created_at: DateTime::parse_from_rfc3339("2022-01-01T00:00:00Z").unwrap(),
        }],
        url: None,
    }
}

fn two_file_snapshot() -> RepoSnapshot {
    RepoSnapshot::from_sources(
        "t",
        None,
        [
            ("net/http/server.go", "package http\n\n// Server serves HTTP.\nfunc (s *Server) ListenAndServe() error {\n\treturn nil\n}\n"),
            ("os/file.go", "package os\n\n// File handles.\nfunc Open(name string) (*File, error) {\n\treturn nil, nil\n}\n"),
        ],
    )
    .unwrap()
}

#[test]
fn one_document_per_artifact() {
    let snap = two_file_snapshot();
    let files = build_index(&snap, GranularityLabel::File, Weighting::TfIdf, None).unwrap();
    assert_eq!(files.len(), 2);
    let dirs = build_index(&snap, GranularityLabel::Directory, Weighting::TfIdf, None).unwrap();
    assert_eq!(dirs.len(), snap.directories().len());
    let funcs = build_index(&snap, GranularityLabel::Function, Weighting::TfIdf, None).unwrap();
    assert_eq!(funcs.len(), 2);
}

#[test]
fn directory_document_aggregates_files_beneath() {
    let snap = two_file_snapshot();
    let d = artifact_documents(&snap, GranularityLabel::Directory);
    let net = &d.iter().find(|(i, _)| i.as_str() == "net/").unwrap().1;
    assert!(net.contains(&"listenandserv".to_string()) || net.contains(&"listen".to_string()));
    assert!(!net.contains(&"open".to_string()));
    let root = &d.iter().find(|(i, _)| i.as_str() == "./").unwrap().1;
    assert!(root.contains(&"open".to_string()));
}

#[test]
fn ubiquitous_term_has_zero_weight() {
    let index = VectorIndex::tfidf(
        GranularityLabel::File,
        docs(&[("a.go", &["common", "x"]), ("b.go", &["common", "y"])]),
    );
    let dim = index.vocabulary()["common"];
    for (_, v) in index.documents() {
        assert!(v.iter().all(|&(d, _)| d != dim));
        let norm: f64 = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_document_has_all_zero_idf() {
    // ln(N/df) = ln(1) for every term, so the one vector stays zero.
    let index = VectorIndex::tfidf(GranularityLabel::File, docs(&[("a.go", &["x", "y"])]));
    assert!(index.vector(&id("a.go")).unwrap().is_empty());
    let got = retrieve_topk(&index, &toks(&["x"]), 5).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].score, 0.0);
}

#[test]
fn unique_shared_term_ranks_first() {
    let index = VectorIndex::tfidf(
        GranularityLabel::File,
        docs(&[("a.go", &["alpha", "shared"]), ("b.go", &["beta", "shared"])]),
    );
    let got = retrieve_topk(&index, &toks(&["alpha"]), 2).unwrap();
    assert_eq!(got[0].id, id("a.go"));
    assert!((got[0].score - 1.0).abs() < 1e-12);
    assert_eq!(got[1].score, 0.0);
}

#[test]
fn k_larger_than_index() {
    let index = VectorIndex::tfidf(
        GranularityLabel::File,
        docs(&[("a.go", &["x"]), ("b.go", &["y"]), ("c.go", &["z"])]),
    );
    assert_eq!(retrieve_topk(&index, &toks(&["x"]), 50).unwrap().len(), 3);
    assert_eq!(retrieve_topk(&index, &toks(&["x"]), 0), Err(BaselineError::InvalidK));
}

#[test]
fn identical_vectors_tie_by_id() {
    let index = VectorIndex::tfidf(
        GranularityLabel::File,
        docs(&[("z.go", &["t", "u"]), ("B.go", &["t", "u"]), ("a.go", &["t", "u"]), ("q.go", &["v"])]),
    );
    let got: Vec<String> = retrieve_topk(&index, &toks(&["t"]), 4)
        .unwrap()
        .into_iter()
        .map(|s| s.id.to_string())
        .collect();
    assert_eq!(got, ["B.go", "a.go", "z.go", "q.go"]);
}

#[test]
fn empty_index() {
    let index = VectorIndex::tfidf(GranularityLabel::File, Vec::new());
    assert_eq!(retrieve_topk(&index, &toks(&["x"]), 1), Err(BaselineError::EmptyIndex));
}

#[test]
fn localization_only_makes_no_calls() {
    let snap = two_file_snapshot();
    let index = build_index(&snap, GranularityLabel::File, Weighting::TfIdf, None).unwrap();
    let run = run_baseline(&proposal("server listen"), &snap, &index, 20, None).unwrap();
    assert_eq!(run.candidates.len(), 2);
    assert_eq!(run.candidates[0].id, id("net/http/server.go"));
    assert!(run.links.is_none());
}

#[test]
fn all_yes_links_every_candidate() {
    let snap = two_file_snapshot();
    let index = build_index(&snap, GranularityLabel::Function, Weighting::TfIdf, None).unwrap();
    let model = ScriptedModel::responder(|_| Some("Yes".into()));
    let config = PipelineConfig::new("m");
    let run = run_baseline(&proposal("open file"), &snap, &index, 20, Some((&config, &model))).unwrap();
    assert_eq!(run.links.unwrap(), run.candidates.iter().map(|c| c.id.clone()).collect());
    assert_eq!(model.call_count(), 2);
}

#[test]
fn sweep_emits_one_list_per_k() {
    let snap = two_file_snapshot();
    let index = build_index(&snap, GranularityLabel::Directory, Weighting::TfIdf, None).unwrap();
    let runs = sweep_k(&proposal("http server"), &index, &DEFAULT_K_SWEEP).unwrap();
    assert_eq!(runs.iter().map(|r| r.k).collect::<Vec<_>>(), DEFAULT_K_SWEEP);
    assert_eq!(runs[0].candidates.len(), 1);
    assert_eq!(runs[6].candidates.len(), index.len());
}

#[test]
fn candidate_rows_use_six_decimals() {
    let run = BaselineRun {
        proposal_id: 3,
        granularity: GranularityLabel::File,
        k: 2,
        candidates: vec![
            ScoredArtifact {
                id: id("a.go"),
                score: 2.0 / 3.0,
            },
            ScoredArtifact {
                id: id("b.go"),
                score: 0.0,
            },
        ],
        links: None,
    };
    let text = candidates_jsonl(&[run]).unwrap();
    assert_eq!(
        text,
        "{\"proposal_id\":3,\"k\":2,\"granularity\":\"file\",\"ranked\":[{\"id\":\"a.go\",\"score\":0.666667},{\"id\":\"b.go\",\"score\":0.000000}]}\n"
    );
    let back: Vec<CandidateRow> = crate::jsonl::parse_jsonl(&text, "x").unwrap();
    assert_eq!(back[0].ids().len(), 2);
    assert_eq!(format_score(-1e-9), "0.000000");
}

struct FakeEmbeddings {
    calls: Mutex<usize>,
}

impl HttpTransport for FakeEmbeddings {
    fn post_json(&self, _: &str, _: Option<&str>, body: &str) -> Result<HttpResponse, TransportFailure> {
        *self.calls.lock().unwrap() += 1;
        let v: serde_json::Value = serde_json::from_str(body).unwrap();
        let data: Vec<serde_json::Value> = v["input"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| {
                let t = t.as_str().unwrap();
                serde_json::json!({"embedding": [t.matches("serv").count() as f64, t.matches("open").count() as f64, 0.5]})
            })
            .collect();
        Ok(HttpResponse {
            status: 200,
            body: serde_json::json!({ "data": data }).to_string(),
        })
    }
}

#[test]
fn external_weighting_uses_embedding_endpoint() {
    let snap = two_file_snapshot();
    let transport = Arc::new(FakeEmbeddings { calls: Mutex::new(0) });
    let client = Arc::new(EmbeddingClient::new("http://emb", "e", None, transport.clone()));
    let index = build_index(&snap, GranularityLabel::File, Weighting::External, Some(client)).unwrap();
    assert_eq!(index.weighting(), Weighting::External);
    for (_, v) in index.documents() {
        let norm: f64 = v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
    let got = retrieve_topk(&index, &toks(&["open", "open"]), 1).unwrap();
    assert_eq!(got[0].id, id("os/file.go"));
    assert_eq!(*transport.calls.lock().unwrap(), 2);
    assert!(build_index(&snap, GranularityLabel::File, Weighting::External, None).is_err());
}

fn token_docs() -> impl Strategy<Value = Vec<Vec<String>>> {
    proptest::collection::vec(proptest::collection::vec("[a-e]{1,2}", 0..6), 1..12)
}

proptest! {
    #[test]
    fn self_similarity_and_symmetry(corpus in token_docs()) {
        let named: Vec<(CodeArtifactId, Vec<String>)> = corpus
            .iter()
            .enumerate()
            .map(|(i, t)| (id(&format!("d{i:02}.go")), t.clone()))
            .collect();
        let index = VectorIndex::tfidf(GranularityLabel::File, named);
        let vs: Vec<&SparseVector> = index.documents().map(|(_, v)| v).collect();
        for a in &vs {
            if !a.is_empty() {
                prop_assert!((cosine(a, a) - 1.0).abs() < 1e-12);
            }
            for b in &vs {
                prop_assert!((cosine(a, b) - cosine(b, a)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn recall_grows_with_k(corpus in token_docs(), query in proptest::collection::vec("[a-e]{1,2}", 0..5), truth_mask in any::<u16>()) {
        let named: Vec<(CodeArtifactId, Vec<String>)> = corpus
            .iter()
            .enumerate()
            .map(|(i, t)| (id(&format!("d{i:02}.go")), t.clone()))
            .collect();
        let truth: BTreeSet<CodeArtifactId> = named
            .iter()
            .enumerate()
            .filter(|(i, _)| truth_mask & (1 << i) != 0)
            .map(|(_, (d, _))| d.clone())
            .collect();
        let index = VectorIndex::tfidf(GranularityLabel::File, named);
        let mut last = 0usize;
        for k in 1..=index.len() + 1 {
            let got: BTreeSet<CodeArtifactId> =
                retrieve_topk(&index, &query, k).unwrap().into_iter().map(|s| s.id).collect();
            let hits = got.intersection(&truth).count();
            prop_assert!(hits >= last);
            last = hits;
        }
        prop_assert_eq!(last, truth.len());
    }
}
