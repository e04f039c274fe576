//! Granularity-aware link generation: decide the granularity, localize
//! hierarchically down to that level, then ask a yes/no question per
//! candidate. Directory-level runs stop after localization.

mod batch;
mod templates;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{concat_discussion, Proposal};
use crate::llm_gateway::{Completion, GatewayError, LanguageModel, PromptRequest, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::repo_model::{
    canonicalize_receiver_text, render_file_skeleton, render_tree_map, ArtifactKind, CodeArtifactId, FunctionSig,
    RepoError, RepoSnapshot, ROOT_DIR,
};
use crate::GranularityLabel;

pub use batch::{read_link_rows, run_batch, write_batch_outputs, BatchResult, LinkRow, ProvenanceRow, RunStatus};
pub use templates::{render, required_placeholders, PromptTemplates, TemplatePaths};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Granularity,
    Directories,
    Files,
    Functions,
    LinkDecision,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Granularity,
        Phase::Directories,
        Phase::Files,
        Phase::Functions,
        Phase::LinkDecision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Granularity => "granularity",
            Phase::Directories => "directories",
            Phase::Files => "files",
            Phase::Functions => "functions",
            Phase::LinkDecision => "link_decision",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{phase} template: {message}")]
    Template { phase: Phase, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("malformed model output after {} attempts", replies.len())]
    MalformedModelOutput { replies: Vec<String> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{0}")]
    Precondition(String),
}

impl From<RepoError> for StepError {
    fn from(err: RepoError) -> Self {
        StepError::Precondition(err.to_string())
    }
}

/// A failed run: where it stopped, why, and what had been gathered so far.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("proposal {proposal_id}: {phase} phase failed: {source}")]
pub struct PipelineError {
    pub proposal_id: u64,
    pub phase: Phase,
    pub granularity: Option<GranularityLabel>,
    #[source]
    pub source: StepError,
    pub provenance: Box<Provenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub templates: PromptTemplates,
    pub system_prompt: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Corrective re-asks after the first malformed reply.
    pub parse_retries: u32,
}

pub const DEFAULT_SYSTEM_PROMPT: &str =
    "You are an expert on the Go source tree. Follow the requested answer format exactly.";
pub const DEFAULT_PARSE_RETRIES: u32 = 2;

impl PipelineConfig {
    pub fn new(model_name: impl Into<String>) -> Self {
        PipelineConfig {
            templates: PromptTemplates::default(),
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            model_name: model_name.into(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            parse_retries: DEFAULT_PARSE_RETRIES,
        }
    }

    pub fn request(&self, user: String) -> PromptRequest {
        PromptRequest {
            system: self.system_prompt.clone(),
            user,
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Not a well-formed path or name.
    Malformed,
    NotInSnapshot,
    /// Exists, but not under any candidate directory.
    OutsideScope,
    /// A bare name shared by several callables in the file.
    Ambiguous,
}

/// A model-proposed candidate that did not make it into the result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub phase: Phase,
    pub candidate: String,
    pub reason: DropReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<CodeArtifactId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFailure {
    pub file: CodeArtifactId,
    pub replies: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localized {
    pub ids: BTreeSet<CodeArtifactId>,
    pub drops: Vec<DroppedCandidate>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionLocalization {
    pub ids: BTreeSet<CodeArtifactId>,
    pub drops: Vec<DroppedCandidate>,
    /// Files whose replies stayed malformed; the others were still used.
    pub failures: Vec<FileFailure>,
}

impl FunctionLocalization {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkDecisionRecord {
    pub artifact: CodeArtifactId,
    pub relevant: bool,
}

/// Everything a run produced on the way to its links.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_directories: Option<BTreeSet<CodeArtifactId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_files: Option<BTreeSet<CodeArtifactId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_functions: Option<BTreeSet<CodeArtifactId>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decisions: Vec<LinkDecisionRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drops: Vec<DroppedCandidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub file_failures: Vec<FileFailure>,
    pub partial: bool,
    pub model_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSet {
    pub proposal_id: u64,
    pub granularity: GranularityLabel,
    pub links: BTreeSet<CodeArtifactId>,
    pub provenance: Provenance,
}

/// Lowercase, punctuation removed, surrounding whitespace trimmed.
pub fn normalize_reply(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .trim()
        .to_lowercase()
}

/// A JSON array of strings, either the whole reply or the outermost
/// bracketed span inside it (replies sometimes arrive fenced or with prose).
pub fn parse_string_array(text: &str) -> Option<Vec<String>> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Vec<String>>(trimmed) {
        return Some(v);
    }
    let start = trimmed.find('[')?;
    let end = trimmed.rfind(']')?;
    if end < start {
        return None;
    }
    serde_json::from_str::<Vec<String>>(&trimmed[start..=end]).ok()
}

const WORD_INSTRUCTION_GRANULARITY: &str = "Answer with exactly one word: directory, file, or function.";
const WORD_INSTRUCTION_LINK: &str = "Answer with exactly one word: Yes or No.";
const ARRAY_INSTRUCTION: &str = "Answer with only a JSON array of strings.";

/// Sends `prompt`, re-asking with a corrective suffix until `parse` accepts
/// a reply or `parse_retries` re-asks are used up.
fn ask<T>(
    model: &dyn LanguageModel,
    config: &PipelineConfig,
    prompt: &str,
    instruction: &str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<T, StepError> {
    let mut replies: Vec<String> = Vec::new();
    for attempt in 0..=config.parse_retries {
        let user = match replies.last() {
            None => prompt.to_string(),
            Some(previous) => format!(
                "{prompt}\n\nAttempt {}. Your previous reply was:\n{previous}\nThat reply could not be used. {instruction}",
                attempt + 1
            ),
        };
        let Completion { text, .. } = model.complete(&config.request(user))?;
        if let Some(value) = parse(&text) {
            return Ok(value);
        }
        log::debug!("unusable reply on attempt {}: {text:?}", attempt + 1);
        replies.push(text);
    }
    Err(StepError::MalformedModelOutput { replies })
}

fn discussion_text(proposal: &Proposal) -> String {
    concat_discussion(proposal).text
}

pub fn decide_granularity(
    proposal: &Proposal,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
) -> Result<GranularityLabel, StepError> {
    let discussion = discussion_text(proposal);
    let prompt = config
        .templates
        .render(Phase::Granularity, &[(templates::DISCUSSION, &discussion)]);
    ask(model, config, &prompt, WORD_INSTRUCTION_GRANULARITY, |reply| {
        normalize_reply(reply).parse::<GranularityLabel>().ok()
    })
}

fn strip_path_prefix(text: &str) -> &str {
    let mut s = text.trim();
    while let Some(rest) = s.strip_prefix("./") {
        s = rest;
    }
    s.trim_start_matches('/')
}

/// Accepts `a/b`, `a/b/`, `./a/b`; `.` and `./` name the root.
fn canonical_directory(text: &str) -> Option<CodeArtifactId> {
    let trimmed = text.trim();
    if trimmed == "." || trimmed == ROOT_DIR {
        return Some(CodeArtifactId::root());
    }
    let path = strip_path_prefix(trimmed);
    if path.is_empty() {
        return None;
    }
    CodeArtifactId::directory(path).ok()
}

fn canonical_file(text: &str) -> Option<CodeArtifactId> {
    CodeArtifactId::file(strip_path_prefix(text)).ok()
}

pub fn localize_directories(
    proposal: &Proposal,
    snapshot: &RepoSnapshot,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
) -> Result<Localized, StepError> {
    if snapshot.is_empty() {
        return Err(StepError::Precondition("snapshot has no files".into()));
    }
    let discussion = discussion_text(proposal);
    let map = render_tree_map(snapshot, None)?;
    let prompt = config.templates.render(
        Phase::Directories,
        &[(templates::DISCUSSION, &discussion), (templates::REPO_MAP, &map)],
    );
    let replies = ask(model, config, &prompt, ARRAY_INSTRUCTION, parse_string_array)?;
    let mut out = Localized::default();
    for reply in replies {
        let drop = |reason| DroppedCandidate {
            phase: Phase::Directories,
            candidate: reply.clone(),
            reason,
            file: None,
        };
        match canonical_directory(&reply) {
            None => out.drops.push(drop(DropReason::Malformed)),
            Some(dir) if !snapshot.directories().contains(&dir) => out.drops.push(drop(DropReason::NotInSnapshot)),
            Some(dir) => {
                out.ids.insert(dir);
            }
        }
    }
    Ok(out)
}

pub fn localize_files(
    proposal: &Proposal,
    snapshot: &RepoSnapshot,
    candidate_dirs: &BTreeSet<CodeArtifactId>,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
) -> Result<Localized, StepError> {
    if candidate_dirs.is_empty() {
        return Ok(Localized::default());
    }
    if let Some(bad) = candidate_dirs.iter().find(|d| !snapshot.directories().contains(*d)) {
        return Err(StepError::Precondition(format!("candidate directory {bad} is not in the snapshot")));
    }
    let discussion = discussion_text(proposal);
    let map = render_tree_map(snapshot, Some(candidate_dirs))?;
    let candidates: String = candidate_dirs.iter().map(|d| format!("{d}\n")).collect();
    let prompt = config.templates.render(
        Phase::Files,
        &[
            (templates::DISCUSSION, &discussion),
            (templates::REPO_MAP, &map),
            (templates::CANDIDATES, &candidates),
        ],
    );
    let replies = ask(model, config, &prompt, ARRAY_INSTRUCTION, parse_string_array)?;
    let mut out = Localized::default();
    for reply in replies {
        let drop = |reason| DroppedCandidate {
            phase: Phase::Files,
            candidate: reply.clone(),
            reason,
            file: None,
        };
        match canonical_file(&reply) {
            None => out.drops.push(drop(DropReason::Malformed)),
            Some(file) if !snapshot.files().contains(&file) => out.drops.push(drop(DropReason::NotInSnapshot)),
            Some(file) if !candidate_dirs.iter().any(|d| file.is_within(d)) => {
                out.drops.push(drop(DropReason::OutsideScope))
            }
            Some(file) => {
                out.ids.insert(file);
            }
        }
    }
    Ok(out)
}

/// Resolves a model-written callable name against one file's signatures.
pub fn match_callable(sigs: &[FunctionSig], reply: &str) -> Result<CodeArtifactId, DropReason> {
    let mut name = reply.trim();
    if let Some((_, callable)) = name.rsplit_once("::") {
        name = callable.trim();
    }
    name = name.strip_prefix("func ").map(str::trim).unwrap_or(name);
    name = name.strip_suffix("()").unwrap_or(name);
    if name.is_empty() {
        return Err(DropReason::Malformed);
    }
    if let Some(rest) = name.strip_prefix('(') {
        let (recv, method) = rest.rsplit_once(").").ok_or(DropReason::Malformed)?;
        let wanted = format!("({}).{}", canonicalize_receiver_text(recv), method.trim());
        return sigs
            .iter()
            .find(|s| s.callable_name() == wanted)
            .map(FunctionSig::id)
            .ok_or(DropReason::NotInSnapshot);
    }
    if let Some(sig) = sigs.iter().find(|s| s.receiver_type.is_none() && s.name == name) {
        return Ok(sig.id());
    }
    let methods: BTreeSet<CodeArtifactId> = sigs.iter().filter(|s| s.name == name).map(FunctionSig::id).collect();
    match methods.len() {
        0 => Err(DropReason::NotInSnapshot),
        1 => Ok(methods.into_iter().next().expect("one element")),
        _ => Err(DropReason::Ambiguous),
    }
}

pub fn localize_functions(
    proposal: &Proposal,
    snapshot: &RepoSnapshot,
    candidate_files: &BTreeSet<CodeArtifactId>,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
) -> Result<FunctionLocalization, StepError> {
    if let Some(bad) = candidate_files.iter().find(|f| !snapshot.files().contains(*f)) {
        return Err(StepError::Precondition(format!("candidate file {bad} is not in the snapshot")));
    }
    let discussion = discussion_text(proposal);
    let mut out = FunctionLocalization::default();
    for file in candidate_files {
        let skeleton = render_file_skeleton(snapshot, file)?;
        let prompt = config.templates.render(
            Phase::Functions,
            &[(templates::DISCUSSION, &discussion), (templates::FILE_SKELETON, &skeleton)],
        );
        let replies = match ask(model, config, &prompt, ARRAY_INSTRUCTION, parse_string_array) {
            Ok(replies) => replies,
            Err(StepError::MalformedModelOutput { replies }) => {
                out.failures.push(FileFailure {
                    file: file.clone(),
                    replies,
                });
                continue;
            }
            Err(other) => return Err(other),
        };
        let sigs = snapshot.functions_in(file);
        for reply in replies {
            match match_callable(sigs, &reply) {
                Ok(id) => {
                    out.ids.insert(id);
                }
                Err(reason) => out.drops.push(DroppedCandidate {
                    phase: Phase::Functions,
                    candidate: reply,
                    reason,
                    file: Some(file.clone()),
                }),
            }
        }
    }
    Ok(out)
}

pub fn decide_link(
    proposal: &Proposal,
    artifact: &CodeArtifactId,
    element_text: &str,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
) -> Result<bool, StepError> {
    let discussion = discussion_text(proposal);
    let element = format!("{artifact}\n\n{element_text}");
    let prompt = config.templates.render(
        Phase::LinkDecision,
        &[(templates::DISCUSSION, &discussion), (templates::ELEMENT, &element)],
    );
    ask(model, config, &prompt, WORD_INSTRUCTION_LINK, |reply| match normalize_reply(reply).as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    })
}

/// Source text shown for an artifact in the yes/no step.
pub fn element_text(snapshot: &RepoSnapshot, artifact: &CodeArtifactId) -> Option<String> {
    match artifact.kind() {
        ArtifactKind::File => snapshot.file_content(artifact).map(str::to_string),
        ArtifactKind::Function => snapshot.function(artifact).and_then(|sig| snapshot.function_source(sig)),
        ArtifactKind::Directory => None,
    }
}

struct CountingModel<'a> {
    inner: &'a dyn LanguageModel,
    calls: AtomicUsize,
}

impl LanguageModel for CountingModel<'_> {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request)
    }
}

/// Runs every phase the chosen granularity calls for.
pub fn run_pipeline(
    proposal: &Proposal,
    snapshot: &RepoSnapshot,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
) -> Result<LinkSet, PipelineError> {
    let counting = CountingModel {
        inner: model,
        calls: AtomicUsize::new(0),
    };
    let mut provenance = Provenance::default();
    let mut granularity = None;
    let result = run_phases(proposal, snapshot, config, &counting, &mut provenance, &mut granularity);
    provenance.model_calls = counting.calls.load(Ordering::Relaxed);
    match result {
        Ok(links) => Ok(LinkSet {
            proposal_id: proposal.id,
            granularity: granularity.expect("set before localization"),
            links,
            provenance,
        }),
        Err((phase, source)) => Err(PipelineError {
            proposal_id: proposal.id,
            phase,
            granularity,
            source,
            provenance: Box::new(provenance),
        }),
    }
}

fn run_phases(
    proposal: &Proposal,
    snapshot: &RepoSnapshot,
    config: &PipelineConfig,
    model: &dyn LanguageModel,
    provenance: &mut Provenance,
    granularity: &mut Option<GranularityLabel>,
) -> Result<BTreeSet<CodeArtifactId>, (Phase, StepError)> {
    let at = |phase: Phase| move |e: StepError| (phase, e);

    let level = decide_granularity(proposal, config, model).map_err(at(Phase::Granularity))?;
    *granularity = Some(level);

    let dirs = localize_directories(proposal, snapshot, config, model).map_err(at(Phase::Directories))?;
    provenance.drops.extend(dirs.drops);
    provenance.candidate_directories = Some(dirs.ids.clone());
    if level == GranularityLabel::Directory {
        return Ok(dirs.ids);
    }

    let files = localize_files(proposal, snapshot, &dirs.ids, config, model).map_err(at(Phase::Files))?;
    provenance.drops.extend(files.drops);
    provenance.candidate_files = Some(files.ids.clone());

    let candidates = if level == GranularityLabel::Function {
        let functions = localize_functions(proposal, snapshot, &files.ids, config, model).map_err(at(Phase::Functions))?;
        provenance.partial = functions.is_partial();
        provenance.drops.extend(functions.drops);
        provenance.file_failures = functions.failures;
        provenance.candidate_functions = Some(functions.ids.clone());
        functions.ids
    } else {
        files.ids
    };

    let mut links = BTreeSet::new();
    for artifact in candidates {
        let text = element_text(snapshot, &artifact).ok_or_else(|| {
            (
                Phase::LinkDecision,
                StepError::Precondition(format!("no source text for {artifact}")),
            )
        })?;
        let relevant = decide_link(proposal, &artifact, &text, config, model).map_err(at(Phase::LinkDecision))?;
        provenance.decisions.push(LinkDecisionRecord {
            artifact: artifact.clone(),
            relevant,
        });
        if relevant {
            links.insert(artifact);
        }
    }
    Ok(links)
}
