//! Immutable index of a Go codebase: directories, files, and top-level
//! callables, plus the compact text views handed to the model.

mod id;
mod lexer;
mod render;
mod scan;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use id::{format_artifact_id, parse_artifact_id, ArtifactKind, CodeArtifactId, FUNCTION_SEP, ROOT_DIR};
pub use lexer::{canonicalize_receiver_text, extract_function_signatures};
pub use render::{render_file_skeleton, render_tree_map};
pub use scan::{scan_repository, scan_repository_with};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unbalanced braces in {file}; last good line {last_good_line}")]
    Parse { file: String, last_good_line: usize },
    #[error("malformed artifact id {0:?}")]
    MalformedId(String),
    #[error("unknown artifact {0}")]
    UnknownArtifact(String),
    #[error("invalid exclude glob {pattern:?}: {message}")]
    InvalidGlob { pattern: String, message: String },
    #[error("snapshot json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("snapshot invariant violated: {0}")]
    Invariant(String),
}

/// One top-level function or method with an executable body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSig {
    pub file: CodeArtifactId,
    pub name: String,
    /// Canonical receiver type (`*Server`, `Map[K,V]`), `None` for functions.
    pub receiver_type: Option<String>,
    /// 1-based, inclusive; from the `func` keyword to the closing brace.
    pub line_start: usize,
    pub line_end: usize,
    pub skeleton_line: String,
}

impl FunctionSig {
    /// `Name` or `(Recv).Name`.
    pub fn callable_name(&self) -> String {
        match &self.receiver_type {
            Some(recv) => format!("({recv}).{}", self.name),
            None => self.name.clone(),
        }
    }

    pub fn id(&self) -> CodeArtifactId {
        CodeArtifactId::function(&self.file, &self.callable_name())
            .expect("signature fields always form a valid function id")
    }
}

/// A file the scanner kept but could not fully process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SnapshotCounts {
    pub directories: usize,
    pub files: usize,
    pub functions: usize,
}

/// Scanned codebase. Construction sorts and validates; nothing mutates it
/// afterwards, so it is shared freely between workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoSnapshot {
    root_label: String,
    commit_id: Option<String>,
    directories: BTreeSet<CodeArtifactId>,
    files: BTreeSet<CodeArtifactId>,
    functions: BTreeMap<CodeArtifactId, Vec<FunctionSig>>,
    file_contents: BTreeMap<CodeArtifactId, String>,
    #[serde(default)]
    issues: Vec<ScanIssue>,
}

impl RepoSnapshot {
    /// Builds a snapshot from in-memory `(path, content)` pairs. Paths are
    /// repo-relative `.go` files; directories are derived from them.
    pub fn from_sources<I, P, C>(root_label: &str, commit_id: Option<String>, sources: I) -> Result<Self, RepoError>
    where
        I: IntoIterator<Item = (P, C)>,
        P: AsRef<str>,
        C: Into<String>,
    {
        let mut entries = Vec::new();
        for (path, content) in sources {
            let file = CodeArtifactId::file(path.as_ref())?;
            let content = content.into();
            let sigs = extract_function_signatures(&content, &file);
            entries.push((file, content, sigs));
        }
        Ok(Self::assemble(root_label, commit_id, entries, Vec::new()))
    }

    pub(crate) fn assemble(
        root_label: &str,
        commit_id: Option<String>,
        entries: Vec<(CodeArtifactId, String, Result<Vec<FunctionSig>, RepoError>)>,
        mut issues: Vec<ScanIssue>,
    ) -> Self {
        let mut directories = BTreeSet::new();
        let mut files = BTreeSet::new();
        let mut functions = BTreeMap::new();
        let mut file_contents = BTreeMap::new();
        for (file, content, sigs) in entries {
            let mut parent = file.parent_dir();
            while let Some(dir) = parent {
                parent = dir.parent_dir();
                if !directories.insert(dir) {
                    break;
                }
            }
            let sigs = sigs.unwrap_or_else(|err| {
                issues.push(ScanIssue {
                    path: file.to_string(),
                    message: err.to_string(),
                });
                Vec::new()
            });
            functions.insert(file.clone(), sigs);
            file_contents.insert(file.clone(), content);
            files.insert(file);
        }
        issues.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
        RepoSnapshot {
            root_label: root_label.to_string(),
            commit_id,
            directories,
            files,
            functions,
            file_contents,
            issues,
        }
    }

    pub fn root_label(&self) -> &str {
        &self.root_label
    }

    pub fn commit_id(&self) -> Option<&str> {
        self.commit_id.as_deref()
    }

    pub fn directories(&self) -> &BTreeSet<CodeArtifactId> {
        &self.directories
    }

    pub fn files(&self) -> &BTreeSet<CodeArtifactId> {
        &self.files
    }

    /// Signatures of one file in source order.
    pub fn functions_in(&self, file: &CodeArtifactId) -> &[FunctionSig] {
        self.functions.get(file).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_functions(&self) -> impl Iterator<Item = &FunctionSig> {
        self.functions.values().flatten()
    }

    /// Distinct function ids (repeated `init` declarations collapse).
    pub fn function_ids(&self) -> BTreeSet<CodeArtifactId> {
        self.all_functions().map(FunctionSig::id).collect()
    }

    pub fn function_count(&self) -> usize {
        self.functions.values().map(Vec::len).sum()
    }

    pub fn counts(&self) -> SnapshotCounts {
        SnapshotCounts {
            directories: self.directories.len(),
            files: self.files.len(),
            functions: self.function_count(),
        }
    }

    pub fn issues(&self) -> &[ScanIssue] {
        &self.issues
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn file_content(&self, file: &CodeArtifactId) -> Option<&str> {
        self.file_contents.get(file).map(String::as_str)
    }

    pub fn contains(&self, id: &CodeArtifactId) -> bool {
        match id.kind() {
            ArtifactKind::Directory => self.directories.contains(id),
            ArtifactKind::File => self.files.contains(id),
            ArtifactKind::Function => self.function(id).is_some(),
        }
    }

    /// First declaration matching a function id.
    pub fn function(&self, id: &CodeArtifactId) -> Option<&FunctionSig> {
        let file = CodeArtifactId::file(id.file_part()?).ok()?;
        let callable = id.callable()?;
        self.functions_in(&file).iter().find(|sig| sig.callable_name() == callable)
    }

    /// Source lines `[line_start, line_end]` of a signature.
    pub fn function_source(&self, sig: &FunctionSig) -> Option<String> {
        let content = self.file_content(&sig.file)?;
        let lines: Vec<&str> = content
            .split('\n')
            .skip(sig.line_start.saturating_sub(1))
            .take(sig.line_end + 1 - sig.line_start)
            .collect();
        Some(lines.join("\n"))
    }

    /// Artifacts of one kind, sorted.
    pub fn artifacts(&self, kind: ArtifactKind) -> Vec<CodeArtifactId> {
        match kind {
            ArtifactKind::Directory => self.directories.iter().cloned().collect(),
            ArtifactKind::File => self.files.iter().cloned().collect(),
            ArtifactKind::Function => self.function_ids().into_iter().collect(),
        }
    }

    /// Checks the structural invariants; used after deserializing a cache.
    pub fn validate(&self) -> Result<(), RepoError> {
        let broken = |msg: String| Err(RepoError::Invariant(msg));
        for file in &self.files {
            let mut parent = file.parent_dir();
            while let Some(dir) = parent {
                if !self.directories.contains(&dir) {
                    return broken(format!("{file} has no directory entry {dir}"));
                }
                parent = dir.parent_dir();
            }
            if !self.file_contents.contains_key(file) {
                return broken(format!("{file} has no content"));
            }
        }
        for dir in &self.directories {
            if !self.files.iter().any(|f| f.is_within(dir)) {
                return broken(format!("{dir} contains no .go file"));
            }
        }
        for (file, sigs) in &self.functions {
            if !self.files.contains(file) {
                return broken(format!("functions recorded for unknown file {file}"));
            }
            if let Some(sig) = sigs.iter().find(|s| &s.file != file || s.line_start > s.line_end) {
                return broken(format!("bad signature {} in {file}", sig.callable_name()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, RepoError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, RepoError> {
        let snapshot: RepoSnapshot = serde_json::from_str(text)?;
        snapshot.validate()?;
        Ok(snapshot)
    }

    pub fn save(&self, path: &Path) -> Result<(), RepoError> {
        fs::write(path, self.to_json()?).map_err(|source| RepoError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RepoError> {
        let text = fs::read_to_string(path).map_err(|source| RepoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
