//! `forge`: command-line entry point for corpus building and evaluation.

mod commands;

use std::net::IpAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forge_core::pipeline::ExitStatus;

#[derive(Parser, Debug)]
#[command(
    name = "forge",
    version,
    about = "Build Javadoc corpora and evaluate documentation generators"
)]
#[command(propagate_version = true)]
struct Cli {
    /// Emit logs as JSON lines on stderr.
    #[arg(long, global = true)]
    log_json: bool,

    /// Worker threads for parallel stages (defaults to the CPU count).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Discover Java files and write the prefiltered inventory.
    Ingest(IngestArgs),
    /// Pair Javadoc blocks with declarations for every kept inventory file.
    Extract(ExtractArgs),
    /// Screen records with the rule set and deduplicate.
    Filter(FilterArgs),
    /// Assemble dataset entries and write seeded train/validation/test splits.
    Build(BuildArgs),
    /// Human review: sessions, the review service, and applying decisions.
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    /// Render prompts for a dataset split.
    Prompts(PromptsArgs),
    /// Generate outputs for a prompt set and score them.
    Eval(EvalArgs),
    /// Score candidate outputs against references.
    Score(ScoreArgs),
    /// Tabulate scored runs into comparison reports.
    Compare(CompareArgs),
    /// Count LoRA trainable parameters.
    LoraParams(LoraArgs),
    /// Run ingest → extract → filter → build from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Inventory file (`*.jsonl`) or a directory to hold `inventory.jsonl`.
    #[arg(long)]
    out: PathBuf,
    /// Glob over repo-relative paths to skip; repeatable.
    #[arg(long)]
    exclude: Vec<String>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    inventory: PathBuf,
    /// Repository manifest; defaults to the copy `forge ingest` left next to
    /// the inventory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Extraction report; defaults to `extract_report.json` beside `--out`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Rule file; the built-in catalog when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Filter report; defaults to `filter_report.json` beside `--out`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Comma-separated train,validation,test ratios.
    #[arg(long, default_value = "0.7687,0.0387,0.1926")]
    ratios: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Split each repository separately.
    #[arg(long)]
    stratify_by_repo: bool,
    /// Also keep class, interface, enum and record documentation.
    #[arg(long)]
    include_types: bool,
}

#[derive(Subcommand, Debug)]
enum AnnotateCommand {
    /// Create a review or calibration session over dataset entries.
    Assign(AssignArgs),
    /// Serve the review API (and optionally the UI bundle).
    Serve(ServeArgs),
    /// Print agreement for a session from the decision log.
    Agreement(AgreementArgs),
    /// Drop removed entries from a dataset according to a review policy.
    Apply(ApplyArgs),
}

#[derive(Args, Debug)]
struct AssignArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Restrict items to one split.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    id: String,
    /// Comma-separated annotator ids.
    #[arg(long, value_delimiter = ',', required = true)]
    annotators: Vec<String>,
    #[arg(long, default_value_t = 2)]
    raters_per_item: usize,
    /// Items per annotator; defaults to an even share.
    #[arg(long)]
    per_annotator: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gold labels (`{"<entry id>": {"verdict", "reason"}}`) make this a
    /// calibration session.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Session file; repeatable.
    #[arg(long = "session", required = true)]
    sessions: Vec<PathBuf>,
    /// Decision log; defaults to `decisions.jsonl` inside the dataset dir.
    #[arg(long)]
    decisions: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Built review UI to mount at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AgreementArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    decisions: PathBuf,
    /// `verdict` or `reason`.
    #[arg(long, default_value = "verdict")]
    categories: String,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Decision log; defaults to `decisions.jsonl` inside the dataset dir.
    #[arg(long)]
    decisions: Option<PathBuf>,
    /// `any_remove` or `majority`.
    #[arg(long, default_value = "any_remove")]
    policy: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PromptsArgs {
    /// Dataset directory holding the split files.
    #[arg(long, default_value = ".")]
    dataset: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// `zero`, `one` or `few`.
    #[arg(long, default_value = "zero")]
    mode: String,
    /// JSON list of train-split exemplar ids; proposed automatically when
    /// omitted in one/few mode.
    #[arg(long)]
    exemplars: Option<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    prompts: PathBuf,
    /// Reference split JSONL.
    #[arg(long)]
    refs: PathBuf,
    /// `file:<outputs.jsonl>`, `cmd:<shell command>` or an http(s) URL.
    #[arg(long)]
    adapter: String,
    /// `<model>:<setting>` with setting one of zero, one, few, finetuned.
    #[arg(long)]
    run_label: String,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Score raw outputs instead of their first Javadoc block.
    #[arg(long)]
    no_postprocess: bool,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Reference split JSONL.
    #[arg(long)]
    refs: PathBuf,
    /// Candidates as JSONL `{"id", "text"}`.
    #[arg(long)]
    cands: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Reduce each candidate to its first Javadoc block before scoring.
    #[arg(long)]
    postprocess: bool,
    #[command(flatten)]
    metric: MetricArgs,
}

#[derive(Args, Debug)]
struct MetricArgs {
    /// `recall` or `f1`.
    #[arg(long, default_value = "recall")]
    rouge_mode: String,
    /// `corpus` or `sentence_smoothed`.
    #[arg(long, default_value = "corpus")]
    bleu_mode: String,
    /// Keep letter case when tokenizing.
    #[arg(long)]
    case_sensitive: bool,
    /// Keep `/**`, `*/` and `*` gutters when tokenizing.
    #[arg(long)]
    keep_comment_markup: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Scored run files.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Markdown report path; CSV and progression files are written beside it.
    #[arg(long)]
    out: PathBuf,
    /// Subset of md,csv,progression.
    #[arg(long, value_delimiter = ',', default_value = "md,csv,progression")]
    formats: Vec<String>,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["spec", "verify_table3"]))]
struct LoraArgs {
    /// Architecture spec file; repeatable.
    #[arg(long)]
    spec: Vec<PathBuf>,
    /// Check the shipped architectures against the reference counts.
    #[arg(long)]
    verify_table3: bool,
    #[arg(long, default_value_t = 16)]
    rank: u64,
    /// Comma-separated target projections (defaults to all seven).
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    /// Also write the default fine-tuning configuration here.
    #[arg(long)]
    training_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated subset of ingest,extract,filter,build (default: all).
    #[arg(long, value_delimiter = ',')]
    stages: Vec<String>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long)]
    exclude: Vec<String>,
    #[arg(long)]
    stratify_by_repo: bool,
    #[arg(long)]
    include_types: bool,
}

fn init_logging(json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

/// Maps an error to the exit status of the first library error in its chain.
fn status_of(err: &anyhow::Error) -> ExitStatus {
    err.chain()
        .find_map(|e| e.downcast_ref::<forge_core::Error>())
        .map(ExitStatus::from_error)
        .unwrap_or(ExitStatus::Runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitStatus::Validation.code()
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    init_logging(cli.log_json);
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            tracing::error!("cannot size worker pool: {e}");
            return ExitCode::from(ExitStatus::Runtime.code() as u8);
        }
    }
    let log_json = cli.log_json;
    let status = match commands::run(cli.command) {
        Ok(status) => status,
        Err(e) => {
            if log_json {
                tracing::error!("{e:#}");
            } else {
                eprintln!("error: {e:#}");
            }
            status_of(&e)
        }
    };
    ExitCode::from(status.code() as u8)
}
