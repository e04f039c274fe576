use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RepoError;

/// Literal used for the repository root directory.
pub const ROOT_DIR: &str = "./";

/// Separator between a file path and a callable name in function ids.
pub const FUNCTION_SEP: &str = "::";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactKind {
    Directory,
    File,
    Function,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactKind::Directory => "directory",
            ArtifactKind::File => "file",
            ArtifactKind::Function => "function",
        })
    }
}

/// Canonical identifier of a directory, file, or function in a snapshot.
///
/// Ordering is bytewise on the canonical text, which is what every sorted
/// collection in the crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeArtifactId {
    kind: ArtifactKind,
    canonical: String,
}

impl PartialOrd for CodeArtifactId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CodeArtifactId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical
            .as_bytes()
            .cmp(other.canonical.as_bytes())
            .then(self.kind.cmp(&other.kind))
    }
}

impl CodeArtifactId {
    pub fn kind(&self) -> ArtifactKind {
        self.kind
    }

    pub fn as_str(&self) -> &str {
        &self.canonical
    }

    pub fn root() -> Self {
        CodeArtifactId {
            kind: ArtifactKind::Directory,
            canonical: ROOT_DIR.to_string(),
        }
    }

    /// Directory id from a repo-relative path with or without trailing slash.
    /// An empty path or "." names the root.
    pub fn directory(path: &str) -> Result<Self, RepoError> {
        let trimmed = path.trim_end_matches('/');
        if trimmed.is_empty() || trimmed == "." {
            return Ok(Self::root());
        }
        parse_artifact_id(&format!("{trimmed}/")).and_then(|id| expect_kind(id, ArtifactKind::Directory, path))
    }

    pub fn file(path: &str) -> Result<Self, RepoError> {
        parse_artifact_id(path).and_then(|id| expect_kind(id, ArtifactKind::File, path))
    }

    /// Function id from its file and callable name (`Name` or `(Recv).Name`).
    pub fn function(file: &CodeArtifactId, callable: &str) -> Result<Self, RepoError> {
        if file.kind != ArtifactKind::File {
            return Err(RepoError::MalformedId(format!("{}{FUNCTION_SEP}{callable}", file.canonical)));
        }
        parse_artifact_id(&format!("{}{FUNCTION_SEP}{callable}", file.canonical))
            .and_then(|id| expect_kind(id, ArtifactKind::Function, callable))
    }

    /// For functions, the file part of the id.
    pub fn file_part(&self) -> Option<&str> {
        match self.kind {
            ArtifactKind::Function => self.canonical.split_once(FUNCTION_SEP).map(|(f, _)| f),
            _ => None,
        }
    }

    /// For functions, the callable part of the id.
    pub fn callable(&self) -> Option<&str> {
        match self.kind {
            ArtifactKind::Function => self.canonical.split_once(FUNCTION_SEP).map(|(_, c)| c),
            _ => None,
        }
    }

    /// Containing directory of a file (or of a function's file), or the parent
    /// of a directory. The root has no parent.
    pub fn parent_dir(&self) -> Option<CodeArtifactId> {
        let path = match self.kind {
            ArtifactKind::Function => self.file_part()?,
            ArtifactKind::File => self.canonical.as_str(),
            ArtifactKind::Directory => {
                if self.canonical == ROOT_DIR {
                    return None;
                }
                self.canonical.trim_end_matches('/')
            }
        };
        let parent = match path.rfind('/') {
            Some(idx) => &path[..=idx],
            None => ROOT_DIR,
        };
        Some(CodeArtifactId {
            kind: ArtifactKind::Directory,
            canonical: parent.to_string(),
        })
    }

    /// Whether `self` lies inside directory `dir` (transitively). A directory
    /// contains itself.
    pub fn is_within(&self, dir: &CodeArtifactId) -> bool {
        if dir.kind != ArtifactKind::Directory {
            return false;
        }
        if dir.canonical == ROOT_DIR {
            return true;
        }
        self.canonical.starts_with(&dir.canonical)
    }

    /// Number of path segments below the root: "./" is 0, "a/" and "x.go" are 1.
    pub fn depth(&self) -> usize {
        let path = match self.kind {
            ArtifactKind::Function => self.file_part().unwrap_or(""),
            _ => self.canonical.as_str(),
        };
        if path == ROOT_DIR {
            0
        } else {
            path.trim_end_matches('/').split('/').count()
        }
    }

    /// Last path segment; directories keep their trailing "/".
    pub fn name(&self) -> &str {
        match self.kind {
            ArtifactKind::Function => self.callable().unwrap_or(""),
            ArtifactKind::Directory if self.canonical == ROOT_DIR => ROOT_DIR,
            ArtifactKind::Directory => {
                let trimmed = &self.canonical[..self.canonical.len() - 1];
                match trimmed.rfind('/') {
                    Some(idx) => &self.canonical[idx + 1..],
                    None => &self.canonical,
                }
            }
            ArtifactKind::File => match self.canonical.rfind('/') {
                Some(idx) => &self.canonical[idx + 1..],
                None => &self.canonical,
            },
        }
    }
}

fn expect_kind(id: CodeArtifactId, kind: ArtifactKind, raw: &str) -> Result<CodeArtifactId, RepoError> {
    if id.kind == kind {
        Ok(id)
    } else {
        Err(RepoError::MalformedId(raw.to_string()))
    }
}

fn valid_path(path: &str) -> bool {
    !path.is_empty()
        && !path.starts_with('/')
        && !path.contains('\\')
        && path
            .split('/')
            .all(|seg| !seg.is_empty() && seg != "." && seg != ".." && !seg.contains(FUNCTION_SEP))
}

fn valid_callable(callable: &str) -> bool {
    if callable.is_empty() || callable.chars().any(char::is_whitespace) {
        return false;
    }
    match callable.strip_prefix('(') {
        None => !callable.contains(['(', ')', '.']),
        Some(rest) => match rest.rsplit_once(").") {
            Some((recv, name)) => !recv.is_empty() && !name.is_empty() && !name.contains(['(', ')', '.']),
            None => false,
        },
    }
}

/// Parses canonical text, inferring the kind from its syntax.
pub fn parse_artifact_id(text: &str) -> Result<CodeArtifactId, RepoError> {
    let malformed = || RepoError::MalformedId(text.to_string());
    if text.matches(FUNCTION_SEP).count() == 1 {
        let (file, callable) = text.split_once(FUNCTION_SEP).ok_or_else(malformed)?;
        if file.ends_with(".go") && valid_path(file) && valid_callable(callable) {
            return Ok(CodeArtifactId {
                kind: ArtifactKind::Function,
                canonical: text.to_string(),
            });
        }
        return Err(malformed());
    }
    if text.contains(FUNCTION_SEP) {
        return Err(malformed());
    }
    if text == ROOT_DIR {
        return Ok(CodeArtifactId::root());
    }
    if let Some(path) = text.strip_suffix('/') {
        if valid_path(path) {
            return Ok(CodeArtifactId {
                kind: ArtifactKind::Directory,
                canonical: text.to_string(),
            });
        }
        return Err(malformed());
    }
    if text.ends_with(".go") && valid_path(text) {
        return Ok(CodeArtifactId {
            kind: ArtifactKind::File,
            canonical: text.to_string(),
        });
    }
    Err(malformed())
}

pub fn format_artifact_id(id: &CodeArtifactId) -> String {
    id.canonical.clone()
}

impl fmt::Display for CodeArtifactId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl FromStr for CodeArtifactId {
    type Err = RepoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_artifact_id(s)
    }
}

impl Serialize for CodeArtifactId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical)
    }
}

impl<'de> Deserialize<'de> for CodeArtifactId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_artifact_id(&text).map_err(serde::de::Error::custom)
    }
}
