use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use undermine::corpus::Split;
use undermine::evaluation::ReferenceMode;
use undermine::generator::{SamplingConfig, Variant};
use undermine::ranker::Objective;
use undermine::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "undermine",
    version,
    about = "Rank an argument's premises by attackability and generate counters that undermine the weakest",
    propagate_version = true
)]
pub struct Cli {
    /// Flat `key = value` file whose keys are long flags of the subcommand;
    /// flags on the command line override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSON-lines corpus and write its per-split manifest
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Write a synthetic corpus whose weak premises carry a marker word
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Train the listwise (or pointwise) premise ranker
    #[command(name = "train-ranker", args_override_self = true)]
    TrainRanker(TrainRankerArgs),
    /// Report P@1 and A@3 of a trained ranker against the baselines
    #[command(name = "eval-ranker", args_override_self = true)]
    EvalRanker(EvalRankerArgs),
    /// Fine-tune the counter generator on a corpus' training triples
    #[command(name = "train-generator", args_override_self = true)]
    TrainGenerator(TrainGeneratorArgs),
    /// Generate one counter per gold triple, attacking the gold weak premises
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Rank premises, attack the top-k and keep the best-overlapping counter
    #[command(args_override_self = true)]
    Undermine(UndermineArgs),
    /// Score generated counters with BLEU, METEOR and weak-premise coverage
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Paired one-tailed t-tests between two evaluation reports
    #[command(args_override_self = true)]
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ingest(_) => "ingest",
            Self::Synth(_) => "synth",
            Self::TrainRanker(_) => "train-ranker",
            Self::EvalRanker(_) => "eval-ranker",
            Self::TrainGenerator(_) => "train-generator",
            Self::Generate(_) => "generate",
            Self::Undermine(_) => "undermine",
            Self::Evaluate(_) => "evaluate",
            Self::Compare(_) => "compare",
        }
    }
}

/// Model backbone: `tiny` or `pretrained:<name>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum Backbone {
    Tiny,
    Pretrained(String),
}

impl From<Backbone> for String {
    fn from(b: Backbone) -> Self {
        match b {
            Backbone::Tiny => "tiny".into(),
            Backbone::Pretrained(name) => format!("pretrained:{name}"),
        }
    }
}

impl std::str::FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "tiny" => Ok(Self::Tiny),
            Some(("pretrained", name)) if !name.is_empty() => Ok(Self::Pretrained(name.to_owned())),
            _ => Err(Error::Config(format!(
                "unknown backbone {s:?} (expected tiny or pretrained:<name>)"
            ))),
        }
    }
}

fn parse_objective(s: &str) -> Result<Objective> {
    match s {
        "listwise" => Ok(Objective::Listwise),
        "pointwise" => Ok(Objective::Pointwise),
        other => Err(Error::Config(format!(
            "unknown objective {other:?} (expected listwise or pointwise)"
        ))),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// JSON-lines corpus file
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Directory for manifest.json
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Directory for corpus.jsonl and manifest.json
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Total posts, split 80/10/10 unless --train/--valid/--test are given
    #[arg(long, default_value_t = 500)]
    pub posts: usize,
    /// Training posts (overrides the 80% share)
    #[arg(long)]
    pub train: Option<usize>,
    /// Validation posts (overrides the 10% share)
    #[arg(long)]
    pub valid: Option<usize>,
    /// Test posts (overrides the 10% share)
    #[arg(long)]
    pub test: Option<usize>,
    /// Word planted in every weak premise
    #[arg(long, default_value = undermine::corpus::DEFAULT_MARKER)]
    pub marker: String,
    /// Word list to draw premises from, one per line (default: built-in)
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainRankerArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Run directory: per-epoch checkpoints, the final model and a manifest
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
    /// `tiny` or `pretrained:<name>`
    #[arg(long, default_value = "tiny")]
    pub backbone: Backbone,
    /// listwise or pointwise (the classifier baseline)
    #[arg(long, default_value = "listwise", value_parser = parse_objective)]
    pub objective: Objective,
    #[arg(long, default_value_t = 4)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Posts per optimizer step
    #[arg(long, default_value_t = 8)]
    pub batch_posts: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    /// Token budget of one claim/premise pair
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
    /// Seeds initialization and batch order
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalRankerArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Listwise ranker checkpoint or train-ranker run directory
    #[arg(long, value_name = "DIR")]
    pub ranker: PathBuf,
    /// Pointwise checkpoint for the classifier baseline
    #[arg(long, value_name = "DIR")]
    pub pointwise: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Seed of the random baseline
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainGeneratorArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Run directory: per-epoch checkpoints, the final model and a manifest
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
    /// w/ (with-weak), w/o (without-weak) or counter-baseline
    #[arg(long, default_value = "without-weak")]
    pub variant: Variant,
    /// `tiny` or `pretrained:<name>`
    #[arg(long, default_value = "tiny")]
    pub backbone: Backbone,
    #[arg(long, default_value_t = 6)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    /// Model context in tokens
    #[arg(long, default_value_t = 256)]
    pub context: usize,
    /// Seeds initialization, distractor draws and batch order
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplingArgs {
    /// Keep the k most likely tokens (0 keeps all)
    #[arg(long, default_value_t = 50)]
    pub sampling_top_k: usize,
    /// Nucleus mass
    #[arg(long, default_value_t = 0.95)]
    pub top_p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 100)]
    pub min_tokens: usize,
    #[arg(long, default_value_t = 150)]
    pub max_tokens: usize,
}

impl SamplingArgs {
    pub fn config(&self, seed: u64) -> SamplingConfig {
        SamplingConfig {
            top_k: self.sampling_top_k,
            top_p: self.top_p,
            temperature: self.temperature,
            min_tokens: self.min_tokens,
            max_tokens: self.max_tokens,
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Generator checkpoint or train-generator run directory
    #[arg(long, value_name = "DIR")]
    pub generator: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Base seed; each counter uses a seed derived from it
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Directory for generated.jsonl
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct UndermineArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Ranker checkpoint or train-ranker run directory
    #[arg(long, value_name = "DIR")]
    pub ranker: Option<PathBuf>,
    /// Generator checkpoint or train-generator run directory
    #[arg(long, value_name = "DIR")]
    pub generator: Option<PathBuf>,
    /// Number of top-ranked premises to attack
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Base seed; each candidate uses a seed derived from it
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampling: SamplingArgs,
    /// Stopword file, one word per line (default: built-in English list)
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Directory for counters.jsonl
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// generated.jsonl or counters.jsonl
    #[arg(long, value_name = "FILE")]
    pub generated: PathBuf,
    /// Reference: counter (quoting sentences) or full (whole comment)
    #[arg(long, default_value = "counter")]
    pub mode: ReferenceMode,
    /// Stopword file, one word per line (default: built-in English list)
    #[arg(long, value_name = "FILE")]
    pub stopwords: Option<PathBuf>,
    /// Directory for report.json, report.txt and coverage-histogram.csv
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// First report.json, or the evaluate directory holding it
    #[arg(value_name = "RUN_A")]
    pub run_a: PathBuf,
    /// Second report.json, or the evaluate directory holding it
    #[arg(value_name = "RUN_B")]
    pub run_b: PathBuf,
    /// Label of the first run (default: its path)
    #[arg(long)]
    pub name_a: Option<String>,
    /// Label of the second run (default: its path)
    #[arg(long)]
    pub name_b: Option<String>,
    /// Directory for comparison.json and comparison.txt
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
}
