//! `miscale`: command-line front end for the mutual-information scaling
//! toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod cmd;
mod exit;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use miscale::gaussian::{Family, DEFAULT_GAMMA, DEFAULT_LAYER_CAP, DEFAULT_RHO};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "miscale", version, about = "Mutual-information scaling toolkit")]
struct Cli {
    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hierarchical Gaussian ground-truth models.
    #[command(subcommand)]
    Gaussian(GaussianCmd),
    /// Token corpora and count tables.
    #[command(subcommand)]
    Ngram(NgramCmd),
    /// Mutual-information estimators.
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Scaling-law fits.
    #[command(subcommand)]
    Fit(FitCmd),
    /// Position-wise NLL and KL curves.
    #[command(subcommand)]
    Metrics(MetricsCmd),
    /// Log-probability record files.
    #[command(subcommand)]
    Logprob(LogprobCmd),
}

/// Selects a Gaussian model either from a covariance file or by its
/// hierarchy parameters.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Covariance file written by `gaussian build`.
    #[arg(long, conflicts_with_all = ["family", "layers"])]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub layers: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
    /// Largest layer count that may be built.
    #[arg(long, default_value_t = DEFAULT_LAYER_CAP)]
    pub cap: u32,
}

#[derive(Debug, Subcommand)]
pub enum GaussianCmd {
    /// Build a covariance and write it as a binary file.
    Build(GaussianBuild),
    /// Exact bipartite MI at one split, or a sweep over layer counts.
    Mi(GaussianMi),
    /// Exact two-point MI.
    Twopoint(GaussianTwopoint),
    /// Draw samples.
    Sample(GaussianSample),
    /// Exact position-wise conditional KL against a Gaussian model q.
    Kl(GaussianKl),
    /// Monte-Carlo bipartite MI from exact conditional laws.
    Mc(GaussianMc),
}

#[derive(Debug, Args, Serialize)]
pub struct GaussianBuild {
    #[arg(long)]
    pub family: Family,
    #[arg(long)]
    pub layers: u32,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_LAYER_CAP)]
    pub cap: u32,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GaussianMi {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Split position: X is positions 0..ell.
    #[arg(long, conflicts_with = "ratio")]
    pub ell: Option<usize>,
    /// Split at round(ratio·L), clamped to 1..L−1.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Emit a CSV series (x = L, y = MI) over layer counts.
    #[arg(long, requires = "family")]
    pub sweep: bool,
    #[arg(long, default_value_t = 1)]
    pub min_layers: u32,
    #[arg(long, default_value_t = 6)]
    pub max_layers: u32,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GaussianTwopoint {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, requires = "j")]
    pub i: Option<usize>,
    #[arg(long, requires = "i")]
    pub j: Option<usize>,
    /// Emit a CSV series of antipodal values (first vs last position) over
    /// layer counts.
    #[arg(long, requires = "family")]
    pub sweep: bool,
    #[arg(long, default_value_t = 1)]
    pub min_layers: u32,
    #[arg(long, default_value_t = 5)]
    pub max_layers: u32,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RealFormat {
    Csv,
    Ngf,
}

#[derive(Debug, Args, Serialize)]
pub struct GaussianSample {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: RealFormat,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GaussianKl {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Samples from p (NGF1 real rows); drawn with --n/--seed if absent.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, requires = "seed")]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model conditional means per sample and position (NGF1 real rows).
    #[arg(long, requires = "q_stds")]
    pub q_means: Option<PathBuf>,
    #[arg(long, requires = "q_means")]
    pub q_stds: Option<PathBuf>,
    /// Without q files, use q = p with stds multiplied by this factor.
    #[arg(long, default_value_t = 1.0)]
    pub std_scale: f64,
    /// Without q files, shift q's means by this many p stds.
    #[arg(long, default_value_t = 0.0)]
    pub mean_shift: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GaussianMc {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub ell: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum NgramCmd {
    /// Unigram histogram of a corpus.
    CountUnigrams(CountUnigrams),
    /// Histogram of within-document pairs at one distance.
    CountPairs(CountPairs),
    /// Histogram of the first two tokens of every segment.
    CountLeading(CountLeading),
    /// Convert a corpus between JSONL and binary.
    Convert(Convert),
    /// Entropy of a count table.
    Entropy(TableEntropy),
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// JSONL or NGC1 binary corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Exclusive upper bound on token ids; checked when given.
    #[arg(long)]
    pub vocab_bound: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
pub struct CountUnigrams {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CountPairs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub distance: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CountLeading {
    /// Corpus whose documents are segments, or a record file with --records.
    #[arg(long)]
    pub segments: PathBuf,
    /// Read segments from log-probability records (their token_ids).
    #[arg(long)]
    pub records: bool,
    /// Skip this many leading tokens of each corpus segment.
    #[arg(long, default_value_t = 0)]
    pub ell: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Jsonl,
    Binary,
}

#[derive(Debug, Args, Serialize)]
pub struct Convert {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum)]
    pub to: CorpusKind,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyKind {
    Grassberger,
    Naive,
}

#[derive(Debug, Args, Serialize)]
pub struct TableEntropy {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, value_enum, default_value = "grassberger")]
    pub estimator: EntropyKind,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EstimateCmd {
    /// Two-point MI from count tables, or a distance scan over a corpus.
    Twopoint(EstTwopoint),
    /// Direct bipartite estimator from conditional and marginal records.
    BipartiteDirect(EstDirect),
    /// vCLUB bipartite estimator from conditional and shuffled records.
    BipartiteVclub(EstVclub),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Pooled,
    Coordinate,
}

#[derive(Debug, Args, Serialize)]
pub struct EstTwopoint {
    /// Corpus to scan; requires --distances.
    #[arg(long, requires = "distances", conflicts_with = "pairs")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub distances: Vec<usize>,
    #[arg(long)]
    pub unigrams: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pooled")]
    pub mode: ModeArg,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstDirect {
    #[arg(long)]
    pub cond: PathBuf,
    #[arg(long)]
    pub marg: PathBuf,
    /// Leading-pair table; derived from the marginal records' token ids if
    /// absent.
    #[arg(long)]
    pub leading_pairs: Option<PathBuf>,
    /// Use the raw model term for the first two tokens.
    #[arg(long)]
    pub no_correction: bool,
    #[arg(long, default_value_t = 0.2)]
    pub model_weight: f64,
    #[arg(long, default_value_t = 0.8)]
    pub ngram_weight: f64,
    /// Known true MI; adds `epsilon = value − truth`.
    #[arg(long)]
    pub truth: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstVclub {
    #[arg(long)]
    pub cond: PathBuf,
    #[arg(long)]
    pub shuffled: PathBuf,
    /// Shuffle manifest the shuffled records must follow.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FitCmd {
    /// Power law by log-log least squares.
    Powerlaw(FitArgs),
    /// Power law plus a constant offset.
    PowerlawOffset(FitArgs),
    /// Logarithmic model y = a·ln x + b.
    Log(FitArgs),
    /// Power law vs logarithmic by y-space residuals.
    Compare(FitArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV with columns x,y[,stderr].
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub x_min: Option<f64>,
    #[arg(long)]
    pub x_max: Option<f64>,
    /// Weight points by their stderr column.
    #[arg(long)]
    pub weighted: bool,
    /// Evaluate the fitted power law at these x values.
    #[arg(long, value_delimiter = ',')]
    pub extrapolate: Vec<f64>,
    /// Sequence length for the history-state dimension bound.
    #[arg(long, requires = "capacity")]
    pub l2m_length: Option<f64>,
    /// Capacity constant per history-state dimension.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Vocabulary term log M subtracted in the bound.
    #[arg(long)]
    pub log_m: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Position-wise mean NLL of a record file.
    Nll(MetricsNll),
    /// KL curve NLL_q − NLL_p from two NLL curves.
    Kl(MetricsKl),
    /// Centered moving average of a curve.
    Smooth(MetricsSmooth),
    /// Mean of a curve.
    Avg(MetricsAvg),
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsNll {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsKl {
    /// NLL curve of the true distribution.
    #[arg(long)]
    pub p: PathBuf,
    /// NLL curve of the model.
    #[arg(long)]
    pub q: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsSmooth {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long)]
    pub window: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsAvg {
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LogprobCmd {
    /// Check record files against the schema.
    Validate(Validate),
    /// Seeded derangement of the sample ids in a record file.
    ShuffleManifest(ShuffleManifestArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Validate {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ShuffleManifestArgs {
    /// Record file whose sample ids are paired.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gaussian(c) => cmd::gaussian::run(c),
        Command::Ngram(c) => cmd::ngram::run(c),
        Command::Estimate(c) => cmd::estimate::run(c),
        Command::Fit(c) => cmd::fit::run(c),
        Command::Metrics(c) => cmd::metrics::run(c),
        Command::Logprob(c) => cmd::logprob::run(c),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit::code(&e));
    }
}
