mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trace_decline::baseline::Weighting;
use trace_decline::eval::ReportFormat;
use trace_decline::llm_gateway::GatewayMode;
use trace_decline::GranularityLabel;

#[derive(Debug, Parser)]
#[command(name = "trace-decline", version, about = "Granularity-aware traceability links between proposals and Go code")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a repository, write the snapshot cache and print artifact counts.
    Scan(ScanArgs),
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Run the three-phase pipeline over the dataset's proposals.
    Link(LinkArgs),
    /// Run the retrieval baseline.
    Baseline(BaselineArgs),
    /// Score links against ground truth and write reports.
    Eval(EvalArgs),
    /// Render a report from per-proposal scores.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Check ground-truth links against the snapshot.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Default)]
struct RepoArgs {
    /// Repository root to scan.
    #[arg(long, value_name = "DIR")]
    repo: Option<PathBuf>,
    /// Glob of paths to leave out (repeatable).
    #[arg(long = "exclude", value_name = "GLOB")]
    exclude: Vec<String>,
    /// Snapshot written by `scan`, used instead of scanning.
    #[arg(long, value_name = "FILE")]
    snapshot: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
struct GatewayArgs {
    /// Gateway mode: live, record or replay.
    #[arg(long)]
    mode: Option<GatewayMode>,
    /// Transcript store (JSONL).
    #[arg(long, value_name = "FILE")]
    store: Option<PathBuf>,
    /// Chat-completions endpoint URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name sent with every request.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Upper bound on concurrent model calls and pipeline workers.
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Reject prompts estimated above this many tokens.
    #[arg(long)]
    token_budget: Option<usize>,
    /// Corrective re-asks after a malformed reply.
    #[arg(long)]
    parse_retries: Option<u32>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    repo: RepoArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Dataset directory.
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    repo: RepoArgs,
    /// Exit 0 even when findings are reported.
    #[arg(long)]
    allow_findings: bool,
}

#[derive(Debug, Args)]
struct LinkArgs {
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    repo: RepoArgs,
    #[command(flatten)]
    gateway: GatewayArgs,
    /// Only run these proposal ids (repeatable).
    #[arg(long = "proposal", value_name = "ID")]
    proposals: Vec<u64>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[command(flatten)]
    repo: RepoArgs,
    /// Artifact level to index: directory, file or function.
    #[arg(long)]
    granularity: Option<GranularityLabel>,
    /// Number of candidates per proposal.
    #[arg(long)]
    k: Option<usize>,
    /// Emit candidates for every k in the sweep list instead of one k.
    #[arg(long)]
    sweep: bool,
    /// Comma-separated k values for --sweep.
    #[arg(long, value_delimiter = ',')]
    k_sweep: Option<Vec<usize>>,
    /// tfidf or external.
    #[arg(long, value_parser = parse_weighting)]
    weighting: Option<Weighting>,
    /// Ask the model the yes/no question for every candidate.
    #[arg(long)]
    link_decision: bool,
    #[command(flatten)]
    gateway: GatewayArgs,
    #[arg(long = "proposal", value_name = "ID")]
    proposals: Vec<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    /// Pipeline links to score (default: <out>/links.jsonl).
    #[arg(long, value_name = "FILE", conflicts_with = "candidates")]
    links: Option<PathBuf>,
    /// Baseline candidates to score instead of pipeline links.
    #[arg(long, value_name = "FILE")]
    candidates: Option<PathBuf>,
    /// Which k of the candidates file to report (default: config k).
    #[arg(long)]
    k: Option<usize>,
    /// Aux label to group by (repeatable; default: every label).
    #[arg(long = "group-by", value_name = "LABEL")]
    group_by: Vec<String>,
    /// Exact permutation p for the length correlations (n <= 10).
    #[arg(long)]
    exact_p: bool,
    /// Exit 0 even when findings are reported.
    #[arg(long)]
    allow_findings: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Per-proposal scores written by `eval`.
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    /// Group by this aux label instead of truth granularity.
    #[arg(long, value_name = "LABEL")]
    group_by: Option<String>,
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Write here instead of stdout.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown weighting {s:?}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
