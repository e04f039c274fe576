use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use trace_decline::baseline::{
    build_index, read_candidates, run_baseline, sweep_k, write_candidates, BaselineError, BaselineRun, Weighting,
};
use trace_decline::corpus::{load_dataset, validate_dataset, Dataset, Proposal, GRANULARITY_LABEL};
use trace_decline::eval::{
    correlations_csv, emit_report, group_by_label, length_correlations, macro_aggregate, score_predictions,
    sweep_csv, sweep_scores, PValueMethod, PerProposalScores, Prediction, ReportFormat, TruthSelection,
};
use trace_decline::jsonl;
use trace_decline::llm_gateway::{
    EmbeddingClient, Gateway, GatewayError, GatewayMode, HttpChatModel, LanguageModel, ReqwestTransport, RetryPolicy,
    TranscriptStore,
};
use trace_decline::pipeline::{
    read_link_rows, run_batch, write_batch_outputs, LinkRow, PipelineConfig, PromptTemplates, RunStatus, StepError,
};
use trace_decline::repo_model::{scan_repository, RepoSnapshot};

use crate::config::RunConfig;
use crate::{BaselineArgs, Cli, Command, DatasetCommand, EvalArgs, GatewayArgs, LinkArgs, RepoArgs, ReportArgs};

#[derive(Debug)]
pub enum CliError {
    /// Validation or scoring findings treated as failures.
    Findings(String),
    Config(anyhow::Error),
    Gateway(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Findings(_) => 1,
            CliError::Config(_) => 2,
            CliError::Gateway(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Findings(m) => write!(f, "{m}"),
            CliError::Config(e) => write!(f, "{e:#}"),
            CliError::Gateway(m) => write!(f, "{m}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Config(e)
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Config(_) | GatewayError::Store(_) | GatewayError::InvalidRequest(_) => {
                CliError::Config(anyhow!(e))
            }
            other => CliError::Gateway(other.to_string()),
        }
    }
}

type CmdResult = Result<(), CliError>;

pub fn run(cli: Cli) -> CmdResult {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    match cli.command {
        Command::Scan(args) => {
            apply_repo(&mut config, args.repo);
            config.validate()?;
            scan(&config)
        }
        Command::Dataset(DatasetCommand::Validate(args)) => {
            apply_repo(&mut config, args.repo);
            if let Some(d) = args.dataset {
                config.dataset = d;
            }
            if args.allow_findings {
                config.eval.fail_on_findings = false;
            }
            config.validate()?;
            validate(&config)
        }
        Command::Link(args) => link(config, args),
        Command::Baseline(args) => baseline(config, args),
        Command::Eval(args) => eval(config, args),
        Command::Report(args) => report(config, args),
    }
}

fn apply_repo(config: &mut RunConfig, args: RepoArgs) {
    if let Some(root) = args.repo {
        config.repo.root = root;
    }
    if !args.exclude.is_empty() {
        config.repo.exclude_globs = args.exclude;
    }
    if let Some(s) = args.snapshot {
        config.repo.snapshot = Some(s);
    }
}

fn apply_gateway(config: &mut RunConfig, args: GatewayArgs) {
    let g = &mut config.gateway;
    if let Some(m) = args.mode {
        g.mode = m;
    }
    if let Some(s) = args.store {
        g.store = s;
    }
    if let Some(e) = args.endpoint {
        g.endpoint = Some(e);
    }
    if let Some(m) = args.model {
        g.model_name = m;
    }
    if let Some(t) = args.temperature {
        g.temperature = t;
    }
    if let Some(n) = args.max_in_flight {
        g.max_in_flight = n;
    }
    if let Some(b) = args.token_budget {
        g.token_budget = Some(b);
    }
    if let Some(r) = args.parse_retries {
        config.pipeline.parse_retries = r;
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    snapshot_commit: Option<&'a str>,
    gateway_mode: Option<GatewayMode>,
    created_at: String,
}

/// Run metadata next to the outputs. The timestamp lives only here.
fn write_manifest(
    config: &RunConfig,
    command: &str,
    snapshot: Option<&RepoSnapshot>,
    mode: Option<GatewayMode>,
) -> Result<(), CliError> {
    ensure_dir(&config.output_dir)?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash(),
        snapshot_commit: snapshot.and_then(|s| s.commit_id()),
        gateway_mode: mode,
        created_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_text(&config.output_dir.join(format!("manifest.{command}.json")), &text)
}

fn load_snapshot(config: &RunConfig) -> Result<RepoSnapshot, CliError> {
    let snapshot = match &config.repo.snapshot {
        Some(path) => RepoSnapshot::load(path).with_context(|| format!("loading snapshot {}", path.display()))?,
        None => scan_repository(&config.repo.root, &config.repo.exclude_globs)
            .with_context(|| format!("scanning {}", config.repo.root.display()))?,
    };
    for issue in snapshot.issues() {
        log::warn!("{}: {}", issue.path, issue.message);
    }
    Ok(snapshot)
}

fn load_data(config: &RunConfig) -> Result<Dataset, CliError> {
    Ok(load_dataset(&config.dataset).with_context(|| format!("loading dataset {}", config.dataset.display()))?)
}

fn select_proposals<'a>(dataset: &'a Dataset, ids: &[u64]) -> Result<Vec<Proposal>, CliError> {
    if ids.is_empty() {
        return Ok(dataset.proposals.clone());
    }
    let wanted: BTreeSet<u64> = ids.iter().copied().collect();
    let mut out = Vec::new();
    for id in wanted {
        let p: &'a Proposal = dataset.proposal(id).ok_or_else(|| anyhow!("proposal {id} is not in the dataset"))?;
        out.push(p.clone());
    }
    Ok(out)
}

fn scan(config: &RunConfig) -> CmdResult {
    let snapshot = scan_repository(&config.repo.root, &config.repo.exclude_globs)
        .with_context(|| format!("scanning {}", config.repo.root.display()))?;
    for issue in snapshot.issues() {
        eprintln!("warning: {}: {}", issue.path, issue.message);
    }
    ensure_dir(&config.output_dir)?;
    let path = config.output_dir.join("snapshot.json");
    snapshot.save(&path).with_context(|| format!("writing {}", path.display()))?;
    write_manifest(config, "scan", Some(&snapshot), None)?;
    let c = snapshot.counts();
    println!("directories={} files={} functions={}", c.directories, c.files, c.functions);
    Ok(())
}

fn validate(config: &RunConfig) -> CmdResult {
    let dataset = load_data(config)?;
    let snapshot = load_snapshot(config)?;
    let report = validate_dataset(&dataset, &snapshot);
    for f in &report.findings {
        println!("proposal {}: {:?}: {}", f.proposal_id, f.class, f.detail);
    }
    println!("proposals={} truths={} findings={}", dataset.proposals.len(), dataset.ground_truths.len(), report.findings.len());
    write_manifest(config, "validate", Some(&snapshot), None)?;
    if !report.is_clean() && config.eval.fail_on_findings {
        return Err(CliError::Findings(format!("{} validation findings", report.findings.len())));
    }
    Ok(())
}

fn pipeline_config(config: &RunConfig) -> Result<PipelineConfig, CliError> {
    let templates = PromptTemplates::load(&config.pipeline.templates).map_err(|e| anyhow!(e))?;
    Ok(PipelineConfig {
        templates,
        system_prompt: config.pipeline.system_prompt.clone(),
        model_name: config.gateway.model_name.clone(),
        temperature: config.gateway.temperature,
        max_output_tokens: config.gateway.max_output_tokens,
        parse_retries: config.pipeline.parse_retries,
    })
}

fn build_gateway(config: &RunConfig) -> Result<Gateway, CliError> {
    let s = &config.gateway;
    if let Some(parent) = s.store.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let store = Arc::new(TranscriptStore::open(&s.store)?);
    let upstream: Option<Arc<dyn LanguageModel>> = match s.mode {
        GatewayMode::Replay => None,
        GatewayMode::Live | GatewayMode::Record => {
            let endpoint = s
                .endpoint
                .clone()
                .ok_or_else(|| anyhow!("{} mode needs gateway.endpoint", s.mode))?;
            let transport = Arc::new(ReqwestTransport::new(Duration::from_secs(s.timeout_secs))?);
            let model = HttpChatModel::from_env(endpoint, transport)?.with_retry(RetryPolicy {
                max_retries: s.retries,
                base_delay: Duration::from_millis(s.retry_base_delay_ms),
            });
            Some(Arc::new(model))
        }
    };
    let mut gateway = Gateway::new(s.mode, store, upstream)?.with_max_in_flight(s.max_in_flight);
    if let Some(budget) = s.token_budget {
        gateway = gateway.with_prompt_budget(budget);
    }
    Ok(gateway)
}

fn link(mut config: RunConfig, args: LinkArgs) -> CmdResult {
    apply_repo(&mut config, args.repo);
    apply_gateway(&mut config, args.gateway);
    if let Some(d) = args.dataset {
        config.dataset = d;
    }
    if !args.proposals.is_empty() {
        config.pipeline.proposals = args.proposals;
    }
    config.validate()?;
    let dataset = load_data(&config)?;
    let proposals = select_proposals(&dataset, &config.pipeline.proposals)?;
    let snapshot = load_snapshot(&config)?;
    let pipeline = pipeline_config(&config)?;
    let gateway = build_gateway(&config)?;

    let results = run_batch(&proposals, &snapshot, &pipeline, &gateway, config.gateway.max_in_flight);
    ensure_dir(&config.output_dir)?;
    write_batch_outputs(&config.output_dir, &results).context("writing link outputs")?;
    if gateway.mode() == GatewayMode::Record {
        gateway.store().compact()?;
    }
    write_manifest(&config, "link", Some(&snapshot), Some(gateway.mode()))?;

    let failed = results.iter().filter(|r| r.is_err()).count();
    eprintln!("proposals={} ok={} failed={}", results.len(), results.len() - failed, failed);
    let gateway_failures: Vec<String> = results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .filter_map(|e| match &e.source {
            StepError::Gateway(g) => Some(format!("proposal {} ({}): {g}", e.proposal_id, e.phase.as_str())),
            _ => None,
        })
        .collect();
    if gateway_failures.is_empty() {
        return Ok(());
    }
    for line in &gateway_failures {
        eprintln!("{line}");
    }
    Err(CliError::Gateway(format!("{} proposals failed on gateway errors", gateway_failures.len())))
}

fn baseline_error(e: BaselineError) -> CliError {
    match e {
        BaselineError::Gateway(g) => g.into(),
        BaselineError::LinkDecision {
            artifact,
            source: StepError::Gateway(g),
        } => CliError::Gateway(format!("link decision for {artifact}: {g}")),
        other => CliError::Config(anyhow!(other)),
    }
}

fn baseline(mut config: RunConfig, args: BaselineArgs) -> CmdResult {
    apply_repo(&mut config, args.repo);
    apply_gateway(&mut config, args.gateway);
    if let Some(d) = args.dataset {
        config.dataset = d;
    }
    let b = &mut config.baseline;
    if let Some(g) = args.granularity {
        b.granularity = g;
    }
    if let Some(k) = args.k {
        b.k = k;
    }
    if let Some(ks) = args.k_sweep {
        b.k_sweep = ks;
    }
    if let Some(w) = args.weighting {
        b.weighting = w;
    }
    b.link_decision |= args.link_decision;
    if !args.proposals.is_empty() {
        config.pipeline.proposals = args.proposals;
    }
    config.validate()?;
    if args.sweep && config.baseline.link_decision {
        return Err(anyhow!("--sweep emits candidates only; drop --link-decision").into());
    }

    let dataset = load_data(&config)?;
    let proposals = select_proposals(&dataset, &config.pipeline.proposals)?;
    let snapshot = load_snapshot(&config)?;
    let embeddings = match config.baseline.weighting {
        Weighting::TfIdf => None,
        Weighting::External => {
            let endpoint = config
                .baseline
                .embedding_endpoint
                .clone()
                .ok_or_else(|| anyhow!("external weighting needs baseline.embedding_endpoint"))?;
            let model = config.baseline.embedding_model.clone().unwrap_or_else(|| config.gateway.model_name.clone());
            let transport = Arc::new(ReqwestTransport::new(Duration::from_secs(config.gateway.timeout_secs))?);
            Some(Arc::new(EmbeddingClient::from_env(endpoint, model, transport)?))
        }
    };
    let index = build_index(&snapshot, config.baseline.granularity, config.baseline.weighting, embeddings)
        .map_err(baseline_error)?;

    let decision = if config.baseline.link_decision {
        Some((pipeline_config(&config)?, build_gateway(&config)?))
    } else {
        None
    };
    let mut runs: Vec<BaselineRun> = Vec::new();
    for p in &proposals {
        if args.sweep {
            runs.extend(sweep_k(p, &index, &config.baseline.k_sweep).map_err(baseline_error)?);
        } else {
            let model = decision.as_ref().map(|(pc, g)| (pc, g as &dyn LanguageModel));
            runs.push(run_baseline(p, &snapshot, &index, config.baseline.k, model).map_err(baseline_error)?);
        }
    }

    ensure_dir(&config.output_dir)?;
    write_candidates(&config.output_dir.join("candidates.jsonl"), &runs).context("writing candidates")?;
    if let Some((_, gateway)) = &decision {
        let rows: Vec<LinkRow> = runs
            .iter()
            .map(|r| LinkRow {
                proposal_id: r.proposal_id,
                granularity: Some(r.granularity),
                links: r.links.clone().unwrap_or_default().into_iter().collect(),
                status: RunStatus::Ok,
                failure_phase: None,
            })
            .collect();
        jsonl::write_jsonl(&config.output_dir.join("baseline_links.jsonl"), &rows).context("writing baseline links")?;
        if gateway.mode() == GatewayMode::Record {
            gateway.store().compact()?;
        }
    }
    let mode = decision.as_ref().map(|(_, g)| g.mode());
    write_manifest(&config, "baseline", Some(&snapshot), mode)?;
    eprintln!("proposals={} lists={} indexed={}", proposals.len(), runs.len(), index.len());
    Ok(())
}

fn labels_to_report(config: &RunConfig, dataset: &Dataset) -> Vec<String> {
    if !config.eval.group_by.is_empty() {
        return config.eval.group_by.clone();
    }
    dataset.label_names().into_iter().filter(|l| l != GRANULARITY_LABEL).collect()
}

fn write_report_pair(dir: &Path, stem: &str, rows: &[trace_decline::eval::GroupMeans]) -> CmdResult {
    write_text(&dir.join(format!("{stem}.csv")), &emit_report(rows, ReportFormat::Csv))?;
    write_text(&dir.join(format!("{stem}.json")), &emit_report(rows, ReportFormat::Json))
}

fn eval(mut config: RunConfig, args: EvalArgs) -> CmdResult {
    if let Some(d) = args.dataset {
        config.dataset = d;
    }
    if let Some(k) = args.k {
        config.baseline.k = k;
    }
    if !args.group_by.is_empty() {
        config.eval.group_by = args.group_by;
    }
    config.eval.exact_p |= args.exact_p;
    if args.allow_findings {
        config.eval.fail_on_findings = false;
    }
    config.validate()?;
    let dataset = load_data(&config)?;
    let out = config.output_dir.clone();
    ensure_dir(&out)?;
    let mut findings: Vec<String> = Vec::new();

    let (predictions, selection): (Vec<Prediction>, TruthSelection) = match &args.candidates {
        Some(path) => {
            let rows = read_candidates(path).with_context(|| format!("reading {}", path.display()))?;
            let points = sweep_scores(&rows, &dataset).map_err(|e| anyhow!(e))?;
            if points.len() > 1 {
                write_text(&out.join("sweep.csv"), &sweep_csv(&points))?;
            }
            let k = config.baseline.k;
            let chosen: Vec<Prediction> = rows.iter().filter(|r| r.k == k).map(Prediction::from).collect();
            if chosen.is_empty() {
                let ks: BTreeSet<usize> = rows.iter().map(|r| r.k).collect();
                return Err(anyhow!("no candidate lists for k={k} (available: {ks:?})").into());
            }
            (chosen, TruthSelection::AtPredictedGranularity)
        }
        None => {
            let path = args.links.clone().unwrap_or_else(|| out.join("links.jsonl"));
            let rows = read_link_rows(&path).with_context(|| format!("reading {}", path.display()))?;
            (rows.iter().map(Prediction::from).collect(), TruthSelection::Primary)
        }
    };

    let run = score_predictions(&predictions, &dataset, selection).map_err(|e| anyhow!(e))?;
    if !run.without_prediction.is_empty() {
        findings.push(format!("no prediction for proposals {:?}", run.without_prediction));
    }
    if !run.without_truth.is_empty() {
        log::info!("no truth record for proposals {:?}", run.without_truth);
    }
    jsonl::write_jsonl(&out.join("scores.jsonl"), &run.scores).context("writing scores")?;
    let report = match macro_aggregate(&run.scores) {
        Ok(r) => r,
        Err(e) => return Err(CliError::Findings(format!("nothing to report: {e}"))),
    };
    let rows = report.rows();
    write_report_pair(&out, "report", &rows)?;

    let method = if config.eval.exact_p {
        PValueMethod::ExactPermutation
    } else {
        PValueMethod::TApproximation
    };
    write_text(
        &out.join("correlations.csv"),
        &correlations_csv(&length_correlations(&run.scores, &dataset, method)),
    )?;

    for label in labels_to_report(&config, &dataset) {
        let map = dataset.label_map(&label);
        let (labeled, unlabeled): (Vec<PerProposalScores>, Vec<PerProposalScores>) =
            run.scores.iter().cloned().partition(|s| map.contains_key(&s.proposal_id));
        if !unlabeled.is_empty() {
            let ids: Vec<u64> = unlabeled.iter().map(|s| s.proposal_id).collect();
            findings.push(format!("label {label:?} missing for proposals {ids:?}"));
        }
        let groups = group_by_label(&labeled, &map).map_err(|e| anyhow!(e))?;
        write_report_pair(&out, &format!("groups.{label}"), &groups)?;
    }
    write_manifest(&config, "eval", None, None)?;
    print!("{}", emit_report(&rows, ReportFormat::Csv));

    for f in &findings {
        eprintln!("finding: {f}");
    }
    if !findings.is_empty() && config.eval.fail_on_findings {
        return Err(CliError::Findings(format!("{} scoring findings", findings.len())));
    }
    Ok(())
}

fn report(mut config: RunConfig, args: ReportArgs) -> CmdResult {
    if let Some(d) = args.dataset {
        config.dataset = d;
    }
    config.validate()?;
    let path: PathBuf = args.scores.unwrap_or_else(|| config.output_dir.join("scores.jsonl"));
    let scores: Vec<PerProposalScores> =
        jsonl::read_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
    let rows = match &args.group_by {
        Some(label) => {
            let map = load_data(&config)?.label_map(label);
            group_by_label(&scores, &map).map_err(|e| CliError::Findings(e.to_string()))?
        }
        None => macro_aggregate(&scores).map_err(|e| CliError::Findings(e.to_string()))?.rows(),
    };
    let text = emit_report(&rows, args.format);
    match &args.output {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    write_manifest(&config, "report", None, None)
}
