use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trace_decline::baseline::{Weighting, DEFAULT_K, DEFAULT_K_SWEEP};
use trace_decline::llm_gateway::{GatewayMode, DEFAULT_MAX_OUTPUT_TOKENS, DEFAULT_TEMPERATURE};
use trace_decline::pipeline::{TemplatePaths, DEFAULT_PARSE_RETRIES, DEFAULT_SYSTEM_PROMPT};
use trace_decline::GranularityLabel;

/// Everything a run depends on. Loaded from one JSON file; command-line
/// flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub repo: RepoSettings,
    pub dataset: PathBuf,
    pub gateway: GatewaySettings,
    pub pipeline: PipelineSettings,
    pub baseline: BaselineSettings,
    pub eval: EvalSettings,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepoSettings {
    pub root: PathBuf,
    pub exclude_globs: Vec<String>,
    /// Snapshot written by `scan`; used instead of rescanning when set.
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySettings {
    pub endpoint: Option<String>,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub retries: u32,
    pub retry_base_delay_ms: u64,
    pub timeout_secs: u64,
    pub mode: GatewayMode,
    pub store: PathBuf,
    pub max_in_flight: usize,
    pub token_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub templates: TemplatePaths,
    pub system_prompt: String,
    pub parse_retries: u32,
    /// Proposals to run; empty means all.
    pub proposals: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSettings {
    pub granularity: GranularityLabel,
    pub weighting: Weighting,
    pub k: usize,
    pub k_sweep: Vec<usize>,
    pub link_decision: bool,
    pub embedding_endpoint: Option<String>,
    pub embedding_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Aux label names to group by; empty means every label in the dataset.
    pub group_by: Vec<String>,
    pub exact_p: bool,
    pub fail_on_findings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            repo: RepoSettings::default(),
            dataset: PathBuf::from("dataset"),
            gateway: GatewaySettings::default(),
            pipeline: PipelineSettings::default(),
            baseline: BaselineSettings::default(),
            eval: EvalSettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Default for RepoSettings {
    fn default() -> Self {
        RepoSettings {
            root: PathBuf::from("."),
            exclude_globs: Vec::new(),
            snapshot: None,
        }
    }
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            endpoint: None,
            model_name: "gpt-4o".to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            retries: 3,
            retry_base_delay_ms: 500,
            timeout_secs: 120,
            mode: GatewayMode::Replay,
            store: PathBuf::from("transcripts.jsonl"),
            max_in_flight: 4,
            token_budget: None,
        }
    }
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            templates: TemplatePaths::default(),
            system_prompt: DEFAULT_SYSTEM_PROMPT.to_string(),
            parse_retries: DEFAULT_PARSE_RETRIES,
            proposals: Vec::new(),
        }
    }
}

impl Default for BaselineSettings {
    fn default() -> Self {
        BaselineSettings {
            granularity: GranularityLabel::File,
            weighting: Weighting::TfIdf,
            k: DEFAULT_K,
            k_sweep: DEFAULT_K_SWEEP.to_vec(),
            link_decision: false,
            embedding_endpoint: None,
            embedding_model: None,
        }
    }
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            group_by: Vec::new(),
            exact_p: false,
            fail_on_findings: true,
        }
    }
}

fn rebase(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl RunConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut config.repo.root);
        if let Some(p) = config.repo.snapshot.as_mut() {
            rebase(base, p);
        }
        rebase(base, &mut config.dataset);
        rebase(base, &mut config.gateway.store);
        rebase(base, &mut config.output_dir);
        let t = &mut config.pipeline.templates;
        for p in [&mut t.granularity, &mut t.directories, &mut t.files, &mut t.functions, &mut t.link_decision]
            .into_iter()
            .flatten()
        {
            rebase(base, p);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.gateway.temperature) {
            anyhow::bail!("temperature {} is outside [0, 2]", self.gateway.temperature);
        }
        if self.gateway.max_in_flight == 0 {
            anyhow::bail!("max_in_flight must be at least 1");
        }
        if self.baseline.k == 0 || self.baseline.k_sweep.contains(&0) {
            anyhow::bail!("k values must be at least 1");
        }
        Ok(())
    }

    /// sha256 over the config's JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
