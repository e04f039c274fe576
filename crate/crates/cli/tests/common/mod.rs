#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use trace_decline::corpus::{load_dataset, Dataset};
use trace_decline::llm_gateway::{Gateway, GatewayMode, ScriptedModel, TranscriptStore};
use trace_decline::pipeline::{run_batch, BatchResult, PipelineConfig};
use trace_decline::repo_model::{scan_repository, RepoSnapshot};

pub const MODEL: &str = "gpt-4o";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn tiny_repo() -> PathBuf {
    fixture("tiny")
}

pub fn toy_dataset() -> PathBuf {
    fixture("toy")
}

pub fn tiny_snapshot() -> RepoSnapshot {
    scan_repository(&tiny_repo(), &[]).unwrap()
}

pub fn toy() -> Dataset {
    load_dataset(&toy_dataset()).unwrap()
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trace-decline"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("TRACE_LLM_API_KEY").output().unwrap()
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Scripted answers for the toy dataset: proposal 101 is about a
/// directory, 102 a file and 103 a method.
pub fn toy_model() -> ScriptedModel {
    ScriptedModel::responder(|req| {
        let u = &req.user;
        let which = if u.contains("move helper package") {
            101
        } else if u.contains("Parse should reject") {
            102
        } else if u.contains("T.Close idempotent") {
            103
        } else {
            return None;
        };
        let reply = if u.contains("Is this source code element relevant") {
            let yes = u.contains("a/x.go\n\n") || u.contains("a/x.go::(*T).Close\n\n");
            if yes { "Yes" } else { "No" }
        } else if u.contains("Decide the granularity") {
            match which {
                101 => "Directory",
                102 => "File",
                _ => "Function",
            }
        } else if u.contains("List the directories") {
            if which == 101 { r#"["a/b/"]"# } else { r#"["a/"]"# }
        } else if u.contains("List the files") {
            if which == 102 { r#"["a/x.go", "a/b/y.go"]"# } else { r#"["a/x.go"]"# }
        } else if u.contains("signatures of one file") {
            r#"["(*T).Close", "Parse"]"#
        } else {
            return None;
        };
        Some(reply.to_string())
    })
}

/// Records the toy run into a transcript store at `path` with the same
/// request settings the command line uses by default.
pub fn record_toy_store(path: &Path) -> Vec<BatchResult> {
    let store = Arc::new(TranscriptStore::open(path).unwrap());
    let gateway = Gateway::new(GatewayMode::Record, store.clone(), Some(Arc::new(toy_model()))).unwrap();
    let results = run_batch(&toy().proposals, &tiny_snapshot(), &PipelineConfig::new(MODEL), &gateway, 2);
    store.compact().unwrap();
    results
}

pub const TOY_LINKS: &str = concat!(
    "{\"proposal_id\":101,\"granularity\":\"directory\",\"links\":[\"a/b/\"],\"status\":\"ok\"}\n",
    "{\"proposal_id\":102,\"granularity\":\"file\",\"links\":[\"a/x.go\"],\"status\":\"ok\"}\n",
    "{\"proposal_id\":103,\"granularity\":\"function\",\"links\":[\"a/x.go::(*T).Close\"],\"status\":\"ok\"}\n",
);
