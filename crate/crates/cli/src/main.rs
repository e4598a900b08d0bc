//! `detectllm`: score texts, run AUROC benchmarks, build paired datasets,
//! perturb passages, and estimate runtime costs.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 backend or transport
//! error, 4 internal invariant violation. JSON results go to stdout,
//! diagnostics to stderr, so commands compose in pipelines.

mod commands;
mod errors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};



#[derive(Parser)]
#[command(name = "detectllm", version, about = "Zero-shot machine-generated-text detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a text (or offline stats records) with one detection method.
    Score(ScoreArgs),
    /// Score a paired dataset with several methods and report AUROC per method.
    Benchmark(BenchmarkArgs),
    /// Build a paired human/machine dataset by prompting a generation backend.
    GenDataset(GenDatasetArgs),
    /// Produce perturbed rewrites of a text.
    Perturb(PerturbArgs),
    /// Estimate per-sample runtime for a method from t_p / t_m timings.
    Cost(CostArgs),
    /// Train a toy n-gram model on a corpus file and save it.
    TrainToy(TrainToyArgs),
    /// Write a deterministic sample corpus (one passage per line) for demos.
    SampleCorpus(SampleCorpusArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// In-process n-gram model (needs --model-file or --train-corpus).
    Toy,
    /// Remote scoring server (needs --url or DETECTLLM_BACKEND_URL).
    Http,
    /// Pre-scored stats-JSONL records (needs --stats).
    Offline,
}

#[derive(Args)]
struct BackendArgs {
    /// Which token-scoring backend to use.
    #[arg(long, value_enum, default_value = "toy")]
    backend: BackendKind,

    /// Serialized toy model produced by `train-toy`.
    #[arg(long, value_name = "FILE")]
    model_file: Option<PathBuf>,

    /// Train a toy model on this corpus (one passage per line) instead of
    /// loading --model-file.
    #[arg(long, value_name = "FILE", conflicts_with = "model_file")]
    train_corpus: Option<PathBuf>,

    /// n-gram order when training with --train-corpus.
    #[arg(long, default_value_t = 3)]
    order: usize,

    /// Additive smoothing when training with --train-corpus.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,

    /// Base URL of the HTTP scoring backend.
    #[arg(long, env = "DETECTLLM_BACKEND_URL", value_name = "URL")]
    url: Option<String>,

    /// Stats-JSONL file for the offline backend.
    #[arg(long, value_name = "FILE")]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbationArgs {
    /// Number of perturbations per text.
    #[arg(long, value_name = "N")]
    perturbations: Option<usize>,

    /// Fraction of words replaced per variant.
    #[arg(long, default_value_t = detectllm::perturb::DEFAULT_MASK_FRACTION)]
    mask_fraction: f64,

    /// Words per replaced span.
    #[arg(long, default_value_t = detectllm::perturb::DEFAULT_SPAN_LENGTH)]
    span_length: usize,

    /// lexical_local (offline) or mask_fill_backend (needs /v1/perturb).
    #[arg(long, default_value = "lexical_local")]
    policy: String,
}

#[derive(Args)]
struct ScoreArgs {
    /// Detection method: log_p, rank, log_rank, entropy, lrr, detect_gpt, npr.
    #[arg(long)]
    method: String,

    /// Text file to score; stdin when omitted (toy and http backends).
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,

    #[command(flatten)]
    backend: BackendArgs,

    #[command(flatten)]
    perturbation: PerturbationArgs,

    /// Pre-perturbed stats-JSONL for offline perturbation methods; variant
    /// records share the original record's id.
    #[arg(long, value_name = "FILE")]
    perturbed_stats: Option<PathBuf>,

    /// Divide the DetectGPT discrepancy by the perturbed std deviation.
    #[arg(long)]
    normalize: bool,

    /// Write the scored TextStats as stats-JSONL.
    #[arg(long, value_name = "FILE")]
    emit_stats: Option<PathBuf>,

    /// Write perturbed-variant stats as stats-JSONL (ids match the original).
    #[arg(long, value_name = "FILE")]
    emit_perturbed_stats: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Paired dataset (JSONL of gen-dataset output).
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,

    /// Comma-separated methods; defaults to all seven.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,

    #[command(flatten)]
    backend: BackendArgs,

    #[command(flatten)]
    perturbation: PerturbationArgs,

    /// Report JSON output path.
    #[arg(long, default_value = "report.json", value_name = "FILE")]
    out: PathBuf,

    /// Also write the plain-text table here (always printed to stdout).
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,

    /// Write raw per-sample scores as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,

    /// Record measured per-method wall-clock in the report (makes reports
    /// non-reproducible byte-for-byte).
    #[arg(long)]
    timing: bool,

    /// Include the shared prompt tokens in the statistics.
    #[arg(long)]
    score_prompt: bool,

    /// Normalize the DetectGPT discrepancy.
    #[arg(long)]
    normalize: bool,

    /// Print per-sample failure diagnostics to stderr.
    #[arg(short, long)]
    verbose: bool,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenDatasetArgs {
    /// Human corpus, one passage per line.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,

    /// Output dataset JSONL (a .meta.json sidecar is written next to it).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    #[command(flatten)]
    backend: BackendArgs,

    /// Opening tokens shared by both texts of a pair.
    #[arg(long, default_value_t = detectllm::datagen::DEFAULT_PROMPT_TOKENS)]
    prompt_tokens: usize,

    /// Number of pairs to build.
    #[arg(long, default_value_t = detectllm::datagen::DEFAULT_N_PAIRS)]
    pairs: usize,

    /// Minimum machine continuation length, in backend tokens.
    #[arg(long, default_value_t = detectllm::datagen::DEFAULT_MIN_LEN)]
    min_len: usize,

    /// Decoding strategy: temperature, top_k, or top_p.
    #[arg(long, default_value = "temperature")]
    decoding: String,

    /// Sampling temperature (applies to every strategy).
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,

    /// Top-k cutoff; only valid with --decoding top_k.
    #[arg(long)]
    k: Option<u32>,

    /// Nucleus mass; only valid with --decoding top_p.
    #[arg(long)]
    p: Option<f64>,

    /// Argmax decoding instead of sampling.
    #[arg(long)]
    greedy: bool,

    /// Continuation budget; defaults to each human text's own length.
    #[arg(long)]
    max_tokens: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PerturbArgs {
    /// Text file to perturb; stdin when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,

    #[command(flatten)]
    perturbation: PerturbationArgs,

    #[command(flatten)]
    backend: BackendArgs,

    /// Output path for the perturbation set JSON; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CostArgs {
    /// Method to estimate.
    #[arg(long)]
    method: String,

    /// Seconds per perturbation (required for detect_gpt and npr).
    #[arg(long)]
    t_p: Option<f64>,

    /// Seconds per simple-statistic evaluation.
    #[arg(long)]
    t_m: f64,

    /// Perturbation count.
    #[arg(long, default_value_t = detectllm::perturb::DEFAULT_PERTURBATIONS)]
    n: usize,
}

#[derive(Args)]
struct SampleCorpusArgs {
    /// Number of passages to write.
    #[arg(long, default_value_t = 200)]
    passages: usize,

    /// Output file, one passage per line.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainToyArgs {
    /// Training corpus, one passage per line.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,

    /// Where to write the serialized model.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    #[arg(long, default_value_t = 3)]
    order: usize,

    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score(args) => commands::score(args),
        Command::Benchmark(args) => commands::benchmark(args),
        Command::GenDataset(args) => commands::gen_dataset(args),
        Command::Perturb(args) => commands::perturb(args),
        Command::Cost(args) => commands::cost(args),
        Command::TrainToy(args) => commands::train_toy(args),
        Command::SampleCorpus(args) => commands::sample_corpus(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
