//! `udstep` — a treebank-to-prompt-to-score harness for dependency
//! parsing with chat models.
//!
//! Every subcommand is deterministic: the same flags, files, and seed
//! produce byte-identical artifacts. Exit codes: 0 success, 2 bad
//! configuration, 3 input/output failure, 4 remote endpoint exhausted.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::BackendArgs;
use error::CliError;

#[derive(Parser)]
#[command(name = "udstep", version, about = "Dependency parsing with chat models: \
prompts out, tables back, scores up.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Task count per prompt (1, 2, or 3 steps).
fn steps_arg() -> clap::builder::RangedI64ValueParser<u8> {
    clap::value_parser!(u8).range(1..=3)
}

#[derive(Subcommand)]
enum Command {
    /// Count sentences and tokens in a treebank.
    Stats {
        #[arg(long)]
        treebank: PathBuf,
    },
    /// Write chat-format training records, one JSON line per sentence.
    ExportSft {
        #[arg(long)]
        treebank: PathBuf,
        /// Second treebank appended after the main one (e.g. held-out data).
        #[arg(long)]
        append: Option<PathBuf>,
        #[arg(long, default_value_t = 3, value_parser = steps_arg())]
        steps: u8,
        /// Treebank code naming the language, e.g. en_ewt.
        #[arg(long)]
        lang: String,
        /// Output JSONL file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Concatenate treebanks, optionally downsampling named ones.
    Mix {
        /// Repeatable CODE=FILE pair, in concatenation order.
        #[arg(long = "treebank", value_name = "CODE=FILE", required = true)]
        treebanks: Vec<String>,
        /// Repeatable CODE=FRACTION pair; keeps ceil(fraction * n) sentences.
        #[arg(long = "downsample", value_name = "CODE=FRAC")]
        downsample: Vec<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CoNLL-U file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep a random fixed-size sample of a treebank.
    Subsample {
        #[arg(long)]
        treebank: PathBuf,
        /// Number of sentences to keep.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output CoNLL-U file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a ladder of nested training files for learning curves.
    CurveExport {
        #[arg(long)]
        treebank: PathBuf,
        /// Ascending sample sizes, comma separated (e.g. 125,250,500).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3, value_parser = steps_arg())]
        steps: u8,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory for sft_<size>.jsonl files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Prompt a model (mock or remote) for every sentence.
    Infer {
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = steps_arg())]
        steps: u8,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
        /// Output directory for completions.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn saved completions back into validated parses.
    Decode {
        /// completions.jsonl written by `infer`.
        #[arg(long)]
        completions: PathBuf,
        /// Gold treebank supplying word forms and sentence order.
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = steps_arg())]
        steps: u8,
        /// Output directory for recovered.conllu and validity.tsv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score system output against gold and print one summary line.
    Score {
        /// Gold treebank.
        #[arg(long)]
        treebank: PathBuf,
        /// System output: completions.jsonl, recovered.conllu, or raw tables.
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = steps_arg())]
        steps: u8,
        /// Optional directory for eval.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// infer, decode, and score in one run, writing every artifact.
    Pipeline {
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = steps_arg())]
        steps: u8,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
        /// Output directory for all artifacts.
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Stats { treebank } => commands::stats(&treebank),
        Command::ExportSft { treebank, append, steps, lang, out } => {
            commands::export_sft(&treebank, append.as_deref(), steps, &lang, &out)
        }
        Command::Mix { treebanks, downsample, seed, out } => {
            commands::mix(&treebanks, &downsample, seed, &out)
        }
        Command::Subsample { treebank, n, seed, out } => {
            commands::subsample(&treebank, n, seed, &out)
        }
        Command::CurveExport { treebank, sizes, steps, lang, seed, out } => {
            commands::curve_export(&treebank, &sizes, steps, &lang, seed, &out)
        }
        Command::Infer { treebank, steps, lang, seed, backend, out } => {
            commands::infer(&treebank, steps, &lang, seed, &backend, &out)
        }
        Command::Decode { completions, treebank, steps, out } => {
            commands::decode(&completions, &treebank, steps, &out)
        }
        Command::Score { treebank, system, steps, out } => {
            commands::score(&treebank, &system, steps, out.as_deref())
        }
        Command::Pipeline { treebank, steps, lang, seed, backend, out } => {
            commands::pipeline(&treebank, steps, &lang, seed, &backend, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
