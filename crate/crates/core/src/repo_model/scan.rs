use std::fs;
use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use walkdir::WalkDir;

use super::{extract_function_signatures, CodeArtifactId, RepoError, RepoSnapshot, ScanIssue};

fn io_err(path: &Path, source: std::io::Error) -> RepoError {
    RepoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn build_globs(patterns: &[String]) -> Result<GlobSet, RepoError> {
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let glob = Glob::new(pattern).map_err(|e| RepoError::InvalidGlob {
            pattern: pattern.clone(),
            message: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| RepoError::InvalidGlob {
        pattern: patterns.join(","),
        message: e.to_string(),
    })
}

/// Resolves `.git/HEAD` to a commit hash when the root is a git checkout.
fn read_commit(root: &Path) -> Option<String> {
    let git = root.join(".git");
    let head = fs::read_to_string(git.join("HEAD")).ok()?;
    let head = head.trim();
    let Some(reference) = head.strip_prefix("ref: ") else {
        return Some(head.to_string());
    };
    if let Ok(hash) = fs::read_to_string(git.join(reference)) {
        return Some(hash.trim().to_string());
    }
    let packed = fs::read_to_string(git.join("packed-refs")).ok()?;
    packed
        .lines()
        .filter_map(|line| line.split_once(' '))
        .find(|(_, name)| *name == reference)
        .map(|(hash, _)| hash.to_string())
}

/// Scans every regular `.go` file under `root` that no exclude glob matches.
/// Globs are matched against repo-relative paths such as `src/cmd/x.go`.
pub fn scan_repository(root: &Path, exclude_globs: &[String]) -> Result<RepoSnapshot, RepoError> {
    let label = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| root.display().to_string());
    scan_repository_with(root, exclude_globs, &label)
}

pub fn scan_repository_with(root: &Path, exclude_globs: &[String], root_label: &str) -> Result<RepoSnapshot, RepoError> {
    let meta = fs::metadata(root).map_err(|e| io_err(root, e))?;
    if !meta.is_dir() {
        return Err(io_err(root, std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory")));
    }
    fs::read_dir(root).map_err(|e| io_err(root, e))?;
    let excludes = build_globs(exclude_globs)?;

    let mut issues = Vec::new();
    let mut paths = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = match entry {
            Ok(entry) => entry,
            Err(err) => {
                let path = err.path().map(|p| p.display().to_string()).unwrap_or_default();
                issues.push(ScanIssue {
                    path,
                    message: err.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else {
            continue;
        };
        let Some(rel) = rel.to_str().map(|s| s.replace('\\', "/")) else {
            issues.push(ScanIssue {
                path: rel.display().to_string(),
                message: "path is not valid UTF-8".to_string(),
            });
            continue;
        };
        if !rel.ends_with(".go") || excludes.is_match(&rel) {
            continue;
        }
        match CodeArtifactId::file(&rel) {
            Ok(id) => paths.push((id, entry.into_path())),
            Err(err) => issues.push(ScanIssue {
                path: rel,
                message: err.to_string(),
            }),
        }
    }

    let results: Vec<_> = paths
        .into_par_iter()
        .map(|(id, path)| match fs::read(&path) {
            Ok(bytes) => {
                let (content, issue) = match String::from_utf8(bytes) {
                    Ok(s) => (s, None),
                    Err(err) => (
                        String::from_utf8_lossy(err.as_bytes()).into_owned(),
                        Some("invalid UTF-8; decoded lossily".to_string()),
                    ),
                };
                let sigs = extract_function_signatures(&content, &id);
                (Some((id.clone(), content, sigs)), issue.map(|m| (id.to_string(), m)))
            }
            Err(err) => (None, Some((id.to_string(), err.to_string()))),
        })
        .collect();

    let mut entries = Vec::with_capacity(results.len());
    for (entry, issue) in results {
        if let Some(entry) = entry {
            entries.push(entry);
        }
        if let Some((path, message)) = issue {
            issues.push(ScanIssue { path, message });
        }
    }
    Ok(RepoSnapshot::assemble(root_label, read_commit(root), entries, issues))
}
