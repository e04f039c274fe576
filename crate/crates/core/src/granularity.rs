use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::repo_model::ArtifactKind;

/// Level of code a proposal is linked at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GranularityLabel {
    Directory,
    File,
    Function,
}

impl GranularityLabel {
    pub const ALL: [GranularityLabel; 3] = [GranularityLabel::Directory, GranularityLabel::File, GranularityLabel::Function];

    pub fn as_str(self) -> &'static str {
        match self {
            GranularityLabel::Directory => "directory",
            GranularityLabel::File => "file",
            GranularityLabel::Function => "function",
        }
    }

    /// Kind of artifact a link at this granularity points to.
    pub fn artifact_kind(self) -> ArtifactKind {
        match self {
            GranularityLabel::Directory => ArtifactKind::Directory,
            GranularityLabel::File => ArtifactKind::File,
            GranularityLabel::Function => ArtifactKind::Function,
        }
    }

    pub fn from_kind(kind: ArtifactKind) -> Self {
        match kind {
            ArtifactKind::Directory => GranularityLabel::Directory,
            ArtifactKind::File => GranularityLabel::File,
            ArtifactKind::Function => GranularityLabel::Function,
        }
    }
}

impl fmt::Display for GranularityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown granularity {0:?}")]
pub struct UnknownGranularity(pub String);

impl FromStr for GranularityLabel {
    type Err = UnknownGranularity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "directory" => Ok(GranularityLabel::Directory),
            "file" => Ok(GranularityLabel::File),
            "function" => Ok(GranularityLabel::Function),
            other => Err(UnknownGranularity(other.to_string())),
        }
    }
}
