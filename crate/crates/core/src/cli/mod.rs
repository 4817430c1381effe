//! Command-line workflows. Each subcommand resolves a [`RunConfig`] from an
//! optional TOML file plus flags, then writes its artifacts under
//! `<output root>/<subcommand>-<config hash>/`.

mod commands;
mod config;

pub use config::{RunConfig, SynthKind, OUTPUT_DIR_ENV};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::Task;
use crate::error::Result;

pub(crate) const COMMANDS: [&str; 11] = [
    "build-index",
    "train-encoder",
    "train-head",
    "zeroshot",
    "infer",
    "report",
    "eval",
    "fewshot",
    "ablate",
    "gen-synth",
    "export-embeddings",
];

#[derive(Debug, Parser)]
#[command(name = "refdx", version, about = "Retrieval-guided evidence classification over embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and write it as an index, optionally re-embedded by an encoder.
    BuildIndex(BuildIndexArgs),
    /// Train the toy dual encoder on (image, abnormality text) pairs.
    TrainEncoder(TrainEncoderArgs),
    /// Train an evidence encoder and inference head for one task.
    TrainHead(TrainHeadArgs),
    /// Classify queries by their nearest text anchors.
    Zeroshot(ZeroshotArgs),
    /// Produce a diagnostic report for one query.
    Infer(InferArgs),
    /// Re-render a saved JSON report, or the built-in example.
    Report(ReportArgs),
    /// Score zero-shot or trained-head predictions and retrieval consistency.
    Eval(EvalArgs),
    /// Few-shot learning curve over repeated sampled training sets.
    Fewshot(FewshotArgs),
    /// Retrain under each ablation mask and compare with the full model.
    Ablate(AblateArgs),
    /// Generate a synthetic corpus with held-out splits.
    GenSynth(GenSynthArgs),
    /// Dump corpus and query embeddings as CSV.
    ExportEmbeddings(ExportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::BuildIndex(_) => "build-index",
            Command::TrainEncoder(_) => "train-encoder",
            Command::TrainHead(_) => "train-head",
            Command::Zeroshot(_) => "zeroshot",
            Command::Infer(_) => "infer",
            Command::Report(_) => "report",
            Command::Eval(_) => "eval",
            Command::Fewshot(_) => "fewshot",
            Command::Ablate(_) => "ablate",
            Command::GenSynth(_) => "gen-synth",
            Command::ExportEmbeddings(_) => "export-embeddings",
        }
    }
}

macro_rules! set {
    ($cfg:ident, $args:expr, $($field:ident),+) => {
        $(if let Some(v) = &$args.$field { $cfg.$field = v.clone().into(); })+
    };
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config: top-level keys, then an optional table named after the subcommand
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output root; artifacts go to <out>/<subcommand>-<config hash>
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = "runs")]
    pub out: PathBuf,
    /// Seed for every random stream
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorpusArg {
    /// Reference corpus manifest; the blob is the same path with a .bin extension
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Training queries (manifest); defaults to the reference corpus, each case excluded from its own retrieval
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation queries (manifest); defaults to every fifth training query
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Test queries (manifest)
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeadArgs {
    /// Task: abnormality, binary, type or severity
    #[arg(long)]
    pub task: Option<Task>,
    /// Retrieved references per query
    #[arg(long)]
    pub k: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epoch limit
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Epochs without validation improvement before stopping
    #[arg(long)]
    pub patience: Option<usize>,
    /// Smallest validation-loss drop that counts as improvement
    #[arg(long)]
    pub min_delta: Option<f64>,
    /// Hidden width of the final MLP
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Ablation mask, e.g. full, no_desc or no_image+no_abn
    #[arg(long)]
    pub mask: Option<String>,
}

impl HeadArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set!(cfg, self, task, k, lr, batch_size, max_epochs, patience, min_delta, hidden, mask);
    }
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Encoder checkpoint used to re-embed every vector; omitted means pass-through
    #[arg(long)]
    pub encoder: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainEncoderArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Held-out pairs (manifest) for retrieval accuracy
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Latent dimension
    #[arg(long)]
    pub dim: Option<usize>,
    /// Contrastive temperature
    #[arg(long)]
    pub tau: Option<f64>,
    /// AdamW learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Pairs per batch
    #[arg(long = "batch-size")]
    pub encoder_batch_size: Option<usize>,
    /// Passes over the pairs
    #[arg(long = "epochs")]
    pub encoder_epochs: Option<usize>,
    /// Decoupled weight decay
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Image-to-text loss only
    #[arg(long)]
    pub one_directional: bool,
    /// Start from identity projections instead of random weights
    #[arg(long)]
    pub identity_init: bool,
}

#[derive(Debug, Args)]
pub struct TrainHeadArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub splits: SplitArgs,
    #[command(flatten)]
    pub head: HeadArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroshotTask {
    Abnormality,
    Binary,
    Type,
    Severity,
    All,
}

#[derive(Debug, Args)]
pub struct ZeroshotArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Query cases (manifest); defaults to the reference corpus
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Classify only this case id
    #[arg(long)]
    pub query: Option<String>,
    /// Which task to report
    #[arg(long, value_enum, default_value = "all")]
    pub task: ZeroshotTask,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Case id of the query, looked up in --test if given, else in the corpus
    #[arg(long)]
    pub query: Option<String>,
    /// Query cases (manifest)
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Retrieved references
    #[arg(long)]
    pub k: Option<usize>,
    /// Trained head checkpoint; repeat for several tasks
    #[arg(long = "head")]
    pub heads: Vec<PathBuf>,
    /// Encoder checkpoint the index was built with, recorded in the report
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Truncate descriptions in report.txt to this many characters
    #[arg(long)]
    pub max_description: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// JSON report to re-render; omitted renders the built-in example
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Truncate descriptions in report.txt to this many characters
    #[arg(long)]
    pub max_description: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Query cases (manifest); defaults to the reference corpus with self-exclusion
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Task for zero-shot scoring
    #[arg(long)]
    pub task: Option<Task>,
    /// Trained head checkpoint; repeat for several
    #[arg(long = "head")]
    pub heads: Vec<PathBuf>,
    /// Largest k for the retrieval consistency curve
    #[arg(long)]
    pub k_max: Option<usize>,
    /// k for the similarity distributions
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FewshotArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub splits: SplitArgs,
    #[command(flatten)]
    pub head: HeadArgs,
    /// Training examples per class, comma separated
    #[arg(long, value_delimiter = ',')]
    pub shots: Option<Vec<usize>>,
    /// Repetitions per shot count
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    #[command(flatten)]
    pub splits: SplitArgs,
    #[command(flatten)]
    pub head: HeadArgs,
    /// Masks to compare, comma separated; join flags of one mask with +
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    /// Seeds per variant
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// clusters or context
    #[arg(long, value_enum)]
    pub kind: Option<SynthKindArg>,
    /// Number of classes (2 to 4)
    #[arg(long)]
    pub classes: Option<usize>,
    /// Reference cases per class (per cluster for context)
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Validation queries per class (per cluster for context)
    #[arg(long)]
    pub val_per_class: Option<usize>,
    /// Test queries per class (per cluster for context)
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Embedding dimension
    #[arg(long)]
    pub dim: Option<usize>,
    /// Class-mean distance from the origin in noise units
    #[arg(long)]
    pub separation: Option<f64>,
    /// Per-coordinate noise
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKindArg {
    Clusters,
    Context,
}

impl From<SynthKindArg> for SynthKind {
    fn from(k: SynthKindArg) -> Self {
        match k {
            SynthKindArg::Clusters => SynthKind::Clusters,
            SynthKindArg::Context => SynthKind::Context,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub corpus: CorpusArg,
    /// Query cases (manifest) to export alongside the corpus
    #[arg(long)]
    pub test: Option<PathBuf>,
}

fn wrap<T>(v: &Option<T>) -> Option<Option<T>>
where
    T: Clone,
{
    v.clone().map(Some)
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::BuildIndex(a) => &a.common,
            Command::TrainEncoder(a) => &a.common,
            Command::TrainHead(a) => &a.common,
            Command::Zeroshot(a) => &a.common,
            Command::Infer(a) => &a.common,
            Command::Report(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Fewshot(a) => &a.common,
            Command::Ablate(a) => &a.common,
            Command::GenSynth(a) => &a.common,
            Command::ExportEmbeddings(a) => &a.common,
        }
    }

    fn corpus(&self) -> Option<&CorpusArg> {
        match self {
            Command::BuildIndex(a) => Some(&a.corpus),
            Command::TrainEncoder(a) => Some(&a.corpus),
            Command::TrainHead(a) => Some(&a.corpus),
            Command::Zeroshot(a) => Some(&a.corpus),
            Command::Infer(a) => Some(&a.corpus),
            Command::Eval(a) => Some(&a.corpus),
            Command::Fewshot(a) => Some(&a.corpus),
            Command::Ablate(a) => Some(&a.corpus),
            Command::ExportEmbeddings(a) => Some(&a.corpus),
            Command::Report(_) | Command::GenSynth(_) => None,
        }
    }

    /// File values, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let common = self.common();
        let mut cfg = match &common.config {
            Some(path) => RunConfig::load(path, self.name())?,
            None => RunConfig::default(),
        };
        set!(cfg, common, seed);
        if let Some(c) = self.corpus() {
            if let Some(p) = wrap(&c.corpus) {
                cfg.corpus = p;
            }
        }
        let splits = |cfg: &mut RunConfig, s: &SplitArgs| {
            if let Some(p) = wrap(&s.train) {
                cfg.train = p;
            }
            if let Some(p) = wrap(&s.val) {
                cfg.val = p;
            }
            if let Some(p) = wrap(&s.test) {
                cfg.test = p;
            }
        };
        match self {
            Command::BuildIndex(a) => {
                if let Some(p) = wrap(&a.encoder) {
                    cfg.encoder = p;
                }
            }
            Command::TrainEncoder(a) => {
                set!(cfg, a, dim, tau, lr, encoder_batch_size, encoder_epochs, weight_decay);
                if let Some(p) = wrap(&a.test) {
                    cfg.test = p;
                }
                cfg.one_directional |= a.one_directional;
                cfg.identity_init |= a.identity_init;
            }
            Command::TrainHead(a) => {
                splits(&mut cfg, &a.splits);
                a.head.apply(&mut cfg);
            }
            Command::Zeroshot(a) => {
                if let Some(p) = wrap(&a.test) {
                    cfg.test = p;
                }
                if let Some(q) = wrap(&a.query) {
                    cfg.query = q;
                }
                cfg.task_filter = match a.task {
                    ZeroshotTask::Abnormality => Some(Task::Abnormality),
                    ZeroshotTask::Binary => Some(Task::BinaryDementia),
                    ZeroshotTask::Type => Some(Task::DementiaType),
                    ZeroshotTask::Severity => Some(Task::Severity),
                    ZeroshotTask::All => cfg.task_filter,
                };
            }
            Command::Infer(a) => {
                set!(cfg, a, k);
                if let Some(q) = wrap(&a.query) {
                    cfg.query = q;
                }
                if let Some(p) = wrap(&a.test) {
                    cfg.test = p;
                }
                if let Some(p) = wrap(&a.encoder) {
                    cfg.encoder = p;
                }
                if !a.heads.is_empty() {
                    cfg.heads = a.heads.clone();
                }
                if let Some(n) = wrap(&a.max_description) {
                    cfg.max_description = n;
                }
            }
            Command::Report(a) => {
                if let Some(p) = wrap(&a.input) {
                    cfg.input = p;
                }
                if let Some(n) = wrap(&a.max_description) {
                    cfg.max_description = n;
                }
            }
            Command::Eval(a) => {
                set!(cfg, a, task, k_max, k);
                if let Some(p) = wrap(&a.test) {
                    cfg.test = p;
                }
                if !a.heads.is_empty() {
                    cfg.heads = a.heads.clone();
                }
            }
            Command::Fewshot(a) => {
                splits(&mut cfg, &a.splits);
                a.head.apply(&mut cfg);
                set!(cfg, a, shots, runs);
            }
            Command::Ablate(a) => {
                splits(&mut cfg, &a.splits);
                a.head.apply(&mut cfg);
                set!(cfg, a, variants, runs);
            }
            Command::GenSynth(a) => {
                set!(cfg, a, classes, per_class, val_per_class, test_per_class, dim, separation, sigma);
                if let Some(k) = a.kind {
                    cfg.synth_kind = k.into();
                }
            }
            Command::ExportEmbeddings(a) => {
                if let Some(p) = wrap(&a.test) {
                    cfg.test = p;
                }
            }
        }
        Ok(cfg)
    }
}

/// Runs one parsed command and returns its run directory.
pub fn execute(command: &Command) -> Result<PathBuf> {
    let cfg = command.resolve()?;
    let dir = command
        .common()
        .out
        .join(format!("{}-{}", command.name(), cfg.hash(command.name())));
    commands::run(command.name(), &cfg, &dir)?;
    Ok(dir)
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 success, 1 usage, 2 I/O, 3 data validation, 4 numeric.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.category().exit_code()
        }
    }
}
