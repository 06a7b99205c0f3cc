//! Subcommand driver for the `piostack` binary. Stages exchange files only;
//! each writes a `manifest.<stage>.json` next to its outputs.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod config;
mod stages;

pub use config::PipelineConfig;

use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "piostack",
    version,
    about = "PIO corpus construction and stacked classification"
)]
pub struct Cli {
    /// Flat key=value file layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` config key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Print the built-in QIEF detector patterns and exit.
    #[arg(long)]
    pub dump_qief_patterns: bool,
    /// Print the built-in heading map and exit.
    #[arg(long)]
    pub dump_heading_map: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search PubMed and store abstracts as raw_abstracts.jsonl.
    Fetch(FetchArgs),
    /// Map section headings to labels: labeled.jsonl.
    Label(LabelArgs),
    /// Normalize, filter and deduplicate: clean.jsonl.
    Clean(CleanArgs),
    /// Split base/stack ids and compute TF-IDF and QIEF features.
    Featurize(FeaturizeArgs),
    /// Train the linear base learner and score the stack split.
    TrainBase(TrainBaseArgs),
    /// Fit the out-of-fold boosted-tree stacker.
    Stack(StackArgs),
    /// Score a stack matrix with a saved stacker.
    Predict(PredictArgs),
    /// Report ROC AUC, F1 and confusion matrices for a probability file.
    Eval(EvalArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Query terms; the clinical-trial, humans and English filters are added.
    #[arg(long, required_unless_present = "xml")]
    pub query: Option<String>,
    /// Parse saved efetch payloads instead of querying the network.
    #[arg(long, conflicts_with = "query")]
    pub xml: Vec<PathBuf>,
    /// Latest publication date, YYYY-MM-DD.
    #[arg(long)]
    pub date_cutoff: Option<chrono::NaiveDate>,
    #[arg(long)]
    pub page_size: Option<u32>,
    #[arg(long, default_value = crate::ingest::EUTILS_BASE)]
    pub base_url: String,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Heading map file replacing the built-in one.
    #[arg(long)]
    pub heading_map: Option<PathBuf>,
    /// Also write up to N sample bodies per heading to heading_samples.json.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Reuse an existing split instead of drawing a new one.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long)]
    pub qief_patterns: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainBaseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub splits: PathBuf,
    /// Fixed input vectors (`id,h1,...`); defaults to hashed bag-of-words.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Model name written to the probability file.
    #[arg(long, default_value = "linear")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    /// Labeled records supplying targets.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub splits: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// One probability file per base model, in column order.
    #[arg(long, required = true)]
    pub probs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Probability file; every model in it is evaluated.
    #[arg(long)]
    pub probs: PathBuf,
    /// Labeled records supplying targets.
    #[arg(long)]
    pub input: PathBuf,
    /// Decision threshold for F1 and confusion; defaults to config.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of labeled sequences (synth.jsonl plus vectors.csv).
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Instead write N structured abstracts as pubmed.xml.
    #[arg(long)]
    pub abstracts: Option<usize>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Config(_) => EXIT_USAGE,
        Error::Fetch(crate::ingest::FetchError::Config(_)) | Error::Ingest(_) => EXIT_USAGE,
        Error::Stack(crate::stacker::StackError::Config(_)) => EXIT_USAGE,
        Error::Learner(crate::base_learner::LearnerError::Config(_)) => EXIT_USAGE,
        Error::Fetch(_) => EXIT_IO,
        _ => EXIT_DATA,
    }
}

/// Run with explicit arguments (the first is the program name); returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();

    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> crate::Result<()> {
    if cli.dump_qief_patterns {
        print!("{}", crate::features::DEFAULT_QIEF_PATTERNS);
        return Ok(());
    }
    if cli.dump_heading_map {
        print!("{}", crate::labeling::DEFAULT_HEADING_MAP);
        return Ok(());
    }
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let ctx = stages::Context { cfg, out: cli.out };
    match cli.command {
        None => Err(Error::Config("no subcommand given (see --help)".into())),
        Some(Command::Fetch(a)) => stages::fetch(&ctx, a),
        Some(Command::Label(a)) => stages::label(&ctx, a),
        Some(Command::Clean(a)) => stages::clean(&ctx, a),
        Some(Command::Featurize(a)) => stages::featurize(&ctx, a),
        Some(Command::TrainBase(a)) => stages::train_base(&ctx, a),
        Some(Command::Stack(a)) => stages::stack(&ctx, a),
        Some(Command::Predict(a)) => stages::predict(&ctx, a),
        Some(Command::Eval(a)) => stages::eval(&ctx, a),
        Some(Command::Synth(a)) => stages::synth(&ctx, a),
    }
}
