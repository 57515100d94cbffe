use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sentilens::pipeline::{Pipeline, PipelineConfig, Stage};
use sentilens::Error;

const TOKEN_ENV: &str = "SENTILENS_TOKEN";

/// Sentiment mining for brand and product mentions in social-media text.
///
/// Settings come from a TOML or JSON config file; `--out`, `--seed` and
/// `--top-k` override the matching config fields.
#[derive(Debug, Parser)]
#[command(name = "sentilens", version)]
struct Cli {
    /// Pipeline config file (TOML, or JSON by extension).
    #[arg(long, global = true, default_value = "sentilens.toml")]
    config: PathBuf,

    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the train/test shuffle.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Debug-level logging on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fetch or ingest records and build corpus.jsonl (and raw.jsonl).
    Collect,
    /// Tokenize the corpus and write the pruned tf-idf matrix.
    Preprocess,
    /// Score every document with the merged lexicon (scores.csv).
    Score,
    /// Turn non-zero lexicon scores into training labels (labeled.jsonl).
    Bootstrap,
    /// Split labeled documents and train the Naive Bayes model (model.json).
    Train,
    /// Classify every corpus document with the trained model.
    Predict,
    /// Confusion matrix and accuracy on the held-out documents.
    Evaluate,
    /// Lexicon vs Naive Bayes label counts over the whole corpus.
    Compare,
    /// Distribution tables, ratios and the score histogram.
    Report,
    /// Write frequent matrix terms for manual lexicon annotation.
    ExportTerms {
        /// Number of terms to export.
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Run several stages in order.
    Run {
        /// Comma-separated stages; defaults to
        /// collect,preprocess,score,bootstrap,train,evaluate,report.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<String>,
    },
}

fn stages_for(command: &Command) -> Result<Vec<Stage>, Error> {
    Ok(match command {
        Command::Collect => vec![Stage::Collect],
        Command::Preprocess => vec![Stage::Preprocess],
        Command::Score => vec![Stage::Score],
        Command::Bootstrap => vec![Stage::Bootstrap],
        Command::Train => vec![Stage::Train],
        Command::Predict => vec![Stage::Predict],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Compare => vec![Stage::Compare],
        Command::Report => vec![Stage::Report],
        Command::ExportTerms { .. } => vec![Stage::ExportTerms],
        Command::Run { stages } if stages.is_empty() => Stage::DEFAULT_RUN.to_vec(),
        Command::Run { stages } => stages
            .iter()
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()?,
    })
}

fn run(cli: &Cli) -> Result<(), Error> {
    let stages = stages_for(&cli.command)?;
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::ExportTerms { top_k: Some(k) } = cli.command {
        config.top_terms = k;
    }
    config.auth_token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    Pipeline::new(config)?.run(&stages)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("sentilens: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
        Err(_) => ExitCode::from(5),
    }
}
