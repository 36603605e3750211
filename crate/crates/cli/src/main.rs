//! `regqa`: index, search, score and benchmark regulatory QA corpora.
//!
//! Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
//! validation error. Data goes to stdout (or `--out`), diagnostics to stderr.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regqa_core::dense::ProviderSpec;

#[derive(Debug, Parser)]
#[command(name = "regqa", version, about = "Retrieval and evaluation toolkit for regulatory QA")]
pub struct Cli {
    /// Cap on worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a sparse index (and optionally chunk embeddings) from a corpus.
    Index(IndexArgs),
    /// Query an index or a corpus.
    Search(SearchArgs),
    /// Run a benchmark.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Dataset statistics for a CQA file.
    Stats(StatsArgs),
    /// Score one prediction/reference pair, or a JSONL file of pairs.
    Score(ScoreArgs),
    /// Fit a small low-rank adapter to a random target map.
    LoraDemo(LoraArgs),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Top-k retrieval benchmark against reference contexts.
    Retrieval(BenchRetrievalArgs),
    /// Average generation metrics, optionally comparing two prediction files.
    Generation(BenchGenerationArgs),
}

/// Where a retrieval corpus comes from.
#[derive(Debug, Args)]
pub struct CorpusSource {
    /// CQA JSON file; its contexts become the chunks.
    #[arg(long, conflicts_with = "text")]
    pub cqa: Option<PathBuf>,

    /// Plain-text document split into overlapping word windows.
    #[arg(long)]
    pub text: Option<PathBuf>,

    /// Words per chunk in --text mode.
    #[arg(long, default_value_t = 200)]
    pub chunk_words: usize,

    /// Words shared by consecutive chunks in --text mode.
    #[arg(long, default_value_t = 50)]
    pub overlap: usize,

    /// Keep one chunk per triplet even when contexts repeat.
    #[arg(long)]
    pub no_dedupe: bool,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct ProviderArgs {
    /// Hashed character-trigram embeddings of this dimension (default 256).
    #[arg(long, value_name = "DIM")]
    pub provider_hashed: Option<usize>,

    /// Precomputed embeddings, JSONL of {"id": text, "vector": [...]}.
    #[arg(long, value_name = "PATH")]
    pub provider_file: Option<PathBuf>,
}

impl ProviderArgs {
    pub fn spec(&self) -> ProviderSpec {
        match (&self.provider_hashed, &self.provider_file) {
            (_, Some(path)) => ProviderSpec::File { path: path.clone() },
            (Some(dim), None) => ProviderSpec::Hashed { dim: *dim },
            (None, None) => ProviderSpec::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct Bm25Args {
    /// BM25 term-frequency saturation
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,

    /// BM25 length normalisation
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
}

#[derive(Debug, Args)]
pub struct ForestArgs {
    /// Trees in the random-projection forest
    #[arg(long, default_value_t = regqa_core::dense::DEFAULT_TREES)]
    pub trees: usize,

    /// Maximum points per forest leaf (at least 2)
    #[arg(long, default_value_t = regqa_core::dense::DEFAULT_LEAF_SIZE)]
    pub leaf_size: usize,

    /// Candidates examined per query (default: trees × k).
    #[arg(long)]
    pub search_k: Option<usize>,

    /// Seed for every random choice.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub source: CorpusSource,

    /// Sparse index output (SPIX format).
    #[arg(long, short)]
    pub out: Option<PathBuf>,

    /// Also write one embedding per chunk, keyed by chunk id, as JSONL.
    #[arg(long)]
    pub embeddings_out: Option<PathBuf>,

    /// Index without Porter stemming.
    #[arg(long)]
    pub no_stem: bool,

    /// File with one stopword per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Query text. For the engine, double-quoted parts are required phrases.
    pub query: String,

    /// Sparse index written by `regqa index`.
    #[arg(long)]
    pub index: Option<PathBuf>,

    /// Chunk embeddings written by `regqa index --embeddings-out`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    #[command(flatten)]
    pub source: CorpusSource,

    /// tfidf, bm25, engine, phrase, flat_dot, flat_cosine or forest.
    #[arg(long, short, default_value = "bm25")]
    pub retriever: String,

    /// Number of results
    #[arg(short, default_value_t = 5)]
    pub k: usize,

    #[command(flatten)]
    pub bm25: Bm25Args,

    #[command(flatten)]
    pub forest: ForestArgs,

    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct BenchRetrievalArgs {
    /// CQA JSON: questions are queries, contexts are references and chunks.
    #[arg(long)]
    pub cqa: PathBuf,

    /// Comma-separated retrievers (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub retrievers: Vec<String>,

    /// Comma-separated, strictly increasing k values.
    #[arg(long = "k", value_delimiter = ',', default_values_t = vec![1usize, 3, 5, 10])]
    pub k_values: Vec<usize>,

    /// f1 or bert.
    #[arg(long, default_value = "bert")]
    pub metric: String,

    /// Keep one chunk per triplet even when contexts repeat.
    #[arg(long)]
    pub no_dedupe: bool,

    #[command(flatten)]
    pub bm25: Bm25Args,

    #[command(flatten)]
    pub forest: ForestArgs,

    #[command(flatten)]
    pub provider: ProviderArgs,

    /// csv or markdown.
    #[arg(long, default_value = "csv")]
    pub format: String,

    /// Write the report here instead of stdout
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchGenerationArgs {
    /// Predictions before fine-tuning (JSONL pairs).
    #[arg(long)]
    pub pre: PathBuf,

    /// Predictions after fine-tuning; adds a comparison with improvements.
    #[arg(long)]
    pub post: Option<PathBuf>,

    /// Comma-separated metrics (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,

    #[command(flatten)]
    pub provider: ProviderArgs,

    /// Echoed in Markdown output.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// csv or markdown.
    #[arg(long, default_value = "csv")]
    pub format: String,

    /// Write the report here instead of stdout
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CQA JSON file
    pub cqa: PathBuf,

    /// Number of question trigrams to list.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Generated answer
    #[arg(long, conflicts_with = "pairs", requires = "reference")]
    pub prediction: Option<String>,

    /// Ground-truth answer
    #[arg(long, conflicts_with = "pairs", requires = "prediction")]
    pub reference: Option<String>,

    /// JSONL file of {"id", "prediction", "reference"}.
    #[arg(long, required_unless_present = "prediction")]
    pub pairs: Option<PathBuf>,

    /// Comma-separated metrics (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,

    #[command(flatten)]
    pub provider: ProviderArgs,
}

#[derive(Debug, Args)]
pub struct LoraArgs {
    /// Input dimension
    #[arg(long, default_value_t = 16)]
    pub d_in: usize,

    /// Output dimension
    #[arg(long, default_value_t = 16)]
    pub d_out: usize,

    /// Adapter rank
    #[arg(long, default_value_t = 4)]
    pub rank: usize,

    /// Gradient steps
    #[arg(long, default_value_t = 200)]
    pub steps: usize,

    /// Learning rate
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code())
        }
    }
}
