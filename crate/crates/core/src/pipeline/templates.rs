use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{ConfigError, Phase};

pub const DISCUSSION: &str = "DISCUSSION";
pub const REPO_MAP: &str = "REPO_MAP";
pub const FILE_SKELETON: &str = "FILE_SKELETON";
pub const ELEMENT: &str = "ELEMENT";
pub const CANDIDATES: &str = "CANDIDATES";

/// Placeholders every template for `phase` must contain.
pub fn required_placeholders(phase: Phase) -> &'static [&'static str] {
    match phase {
        Phase::Granularity => &[DISCUSSION],
        Phase::Directories => &[DISCUSSION, REPO_MAP],
        Phase::Files => &[DISCUSSION, REPO_MAP, CANDIDATES],
        Phase::Functions => &[DISCUSSION, FILE_SKELETON],
        Phase::LinkDecision => &[DISCUSSION, ELEMENT],
    }
}

/// Optional per-step template files; unset steps use the built-in text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatePaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directories: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_decision: Option<PathBuf>,
}

impl TemplatePaths {
    fn get(&self, phase: Phase) -> Option<&PathBuf> {
        match phase {
            Phase::Granularity => self.granularity.as_ref(),
            Phase::Directories => self.directories.as_ref(),
            Phase::Files => self.files.as_ref(),
            Phase::Functions => self.functions.as_ref(),
            Phase::LinkDecision => self.link_decision.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    texts: BTreeMap<Phase, String>,
}

fn builtin(phase: Phase) -> &'static str {
    match phase {
        Phase::Granularity => include_str!("../../templates/granularity.txt"),
        Phase::Directories => include_str!("../../templates/directories.txt"),
        Phase::Files => include_str!("../../templates/files.txt"),
        Phase::Functions => include_str!("../../templates/functions.txt"),
        Phase::LinkDecision => include_str!("../../templates/link.txt"),
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            texts: Phase::ALL.iter().map(|&p| (p, builtin(p).to_string())).collect(),
        }
    }
}

impl PromptTemplates {
    /// Built-in templates with any configured files swapped in.
    pub fn load(paths: &TemplatePaths) -> Result<Self, ConfigError> {
        let mut templates = PromptTemplates::default();
        for phase in Phase::ALL {
            if let Some(path) = paths.get(phase) {
                let text = fs::read_to_string(path).map_err(|e| ConfigError::Template {
                    phase,
                    message: format!("{}: {e}", path.display()),
                })?;
                templates.set(phase, text)?;
            }
        }
        Ok(templates)
    }

    pub fn set(&mut self, phase: Phase, text: String) -> Result<(), ConfigError> {
        check(phase, &text)?;
        self.texts.insert(phase, text);
        Ok(())
    }

    pub fn get(&self, phase: Phase) -> &str {
        &self.texts[&phase]
    }

    pub fn render(&self, phase: Phase, values: &[(&str, &str)]) -> String {
        render(self.get(phase), values)
    }
}

fn check(phase: Phase, text: &str) -> Result<(), ConfigError> {
    for name in required_placeholders(phase) {
        if !text.contains(&format!("{{{{{name}}}}}")) {
            return Err(ConfigError::Template {
                phase,
                message: format!("missing placeholder {{{{{name}}}}}"),
            });
        }
    }
    Ok(())
}

/// Single-pass substitution of `{{NAME}}`; inserted values are never
/// rescanned and unknown placeholders are left as written.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let name = &after[..end];
                match values.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => {
                        out.push_str("{{");
                        out.push_str(name);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
