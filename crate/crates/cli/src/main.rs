//! `opnote`: command line entry points over the extraction library.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opnote_backends::BackendKind;
use opnote_core::{LanguageMode, MatchMode, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "opnote", version, about = "Structured operation records from thyroid operation narratives")]
struct Cli {
    /// Service config file; its `[pipeline]` table sets extraction defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Log more (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct PipelineArgs {
    #[arg(long, value_name = "rule|remote|llm")]
    pub backend: Option<BackendKind>,
    /// Normalize mixed-language transcripts before tagging.
    #[arg(long)]
    pub normalize: bool,
    /// Bundled pack name (en, ko) or a pack TOML file.
    #[arg(long, value_name = "PACK")]
    pub lang_pack: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract a record from a transcript, or predictions for a whole corpus.
    Extract {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Transcript text file or corpus directory (stdin when omitted).
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        /// Output file, or directory for corpus input (stdout when omitted).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Language mode of a single transcript.
        #[arg(long, default_value = "monolingual")]
        language_mode: LanguageMode,
        /// Documents processed concurrently for corpus input.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..=256))]
        jobs: u16,
    },
    /// Build a record from a text and its entity spans.
    Structure {
        /// JSON object `{"text": ..., "spans": [{"tag", "start", "end"}, ...]}` (stdin when omitted).
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "PACK")]
        lang_pack: Option<String>,
        /// Also write the audit trail of overridden values to this file.
        #[arg(long, value_name = "PATH")]
        audit: Option<PathBuf>,
    },
    /// Render the anatomy image of a record as SVG.
    Render {
        /// Record JSON, or any object with a `record` member (stdin when omitted).
        #[arg(value_name = "RECORD", conflicts_with = "input")]
        record: Option<PathBuf>,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Score predictions against a gold corpus.
    Eval {
        /// Gold corpus directory or gold JSONL file.
        #[arg(long, value_name = "PATH")]
        gold: PathBuf,
        /// Prediction directory or JSONL file (stdin when omitted).
        #[arg(long = "pred", value_name = "PATH")]
        pred: Option<PathBuf>,
        #[arg(long, default_value = "json", value_name = "json|csv|markdown")]
        format: ReportFormat,
        #[arg(long, default_value = "exact", value_parser = parse_match_mode)]
        match_mode: MatchMode,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic annotated corpus.
    GenCorpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of documents (defaults to the preset size, or 741).
        #[arg(short = 'n', long = "n-documents")]
        n: Option<usize>,
        /// Named profile: thyroner, thyrotranscript, full.
        #[arg(long, conflicts_with = "profile")]
        preset: Option<String>,
        /// Generator profile TOML file.
        #[arg(long, value_name = "FILE")]
        profile: Option<PathBuf>,
        #[arg(long, value_name = "PACK")]
        lang_pack: Option<String>,
        /// Probability applied to every noise mode.
        #[arg(long, value_name = "P")]
        noise: Option<f64>,
        /// Output corpus directory (gold JSONL on stdout when omitted).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Split a corpus into train, validation and test corpora.
    Split {
        #[arg(value_name = "TRAIN")]
        train: f64,
        #[arg(value_name = "VALID")]
        valid: f64,
        #[arg(value_name = "TEST")]
        test: f64,
        /// Corpus directory or gold JSONL file (stdin when omitted).
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        /// Directory receiving `train/`, `valid/` and `test/`.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, value_name = "ADDR")]
        listen: Option<std::net::SocketAddr>,
        #[arg(long, value_name = "DIR")]
        storage: Option<PathBuf>,
    },
}

fn parse_match_mode(s: &str) -> Result<MatchMode, String> {
    match s {
        "exact" => Ok(MatchMode::Exact),
        "overlap" => Ok(MatchMode::Overlap),
        other => Err(format!("unknown match mode {other:?} (exact, overlap)")),
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Extract { pipeline, input, out, language_mode, jobs } => {
            commands::extract(config, &pipeline, input.as_deref(), out.as_deref(), language_mode, jobs as usize)
        }
        Command::Structure { input, out, lang_pack, audit } => {
            commands::structure(config, lang_pack.as_deref(), input.as_deref(), out.as_deref(), audit.as_deref())
        }
        Command::Render { record, input, out } => commands::render(record.or(input).as_deref(), out.as_deref()),
        Command::Eval { gold, pred, format, match_mode, out } => {
            commands::eval(&gold, pred.as_deref(), format, match_mode, out.as_deref())
        }
        Command::GenCorpus { seed, n, preset, profile, lang_pack, noise, out } => {
            commands::gen_corpus(commands::GenArgs { seed, n, preset, profile, lang_pack, noise }, out.as_deref())
        }
        Command::Split { train, valid, test, input, out, seed } => {
            commands::split((train, valid, test), input.as_deref(), &out, seed)
        }
        Command::Serve { listen, storage } => commands::serve(config, listen, storage),
    }
}
