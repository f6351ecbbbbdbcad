//! `stem`: batch stance detection over conversation corpora.
//!
//! ```text
//! stem run  [OPTIONS] --out DIR INPUT...
//! stem eval [OPTIONS] --partitions DIR --out DIR CORPUS...
//! stem gen  [OPTIONS] --count N --out DIR
//! ```

mod cmd_eval;
mod cmd_gen;
mod cmd_run;
mod config;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunArgs;

#[derive(Parser)]
#[command(name = "stem", version, about = "Unsupervised stance detection from conversation structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition every conversation of a corpus into two stance groups.
    Run(RunCmd),
    /// Score partitions against gold labels.
    Eval(EvalCmd),
    /// Generate a synthetic two-faction corpus with gold sidecars.
    Gen(GenCmd),
}

#[derive(Args)]
struct RunCmd {
    /// Corpus files (.json / .jsonl) or directories containing them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    opts: RunArgs,
}

#[derive(Args)]
struct EvalCmd {
    /// Corpus files or directories the partitions were computed from.
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    /// Directory holding `*.partition.json` files from `stem run`.
    #[arg(long)]
    partitions: PathBuf,
    /// Author-label sidecar files or directories (`*.gold.json`).
    #[arg(long)]
    gold: Vec<PathBuf>,
    #[command(flatten)]
    opts: RunArgs,
}

#[derive(Args)]
struct GenCmd {
    /// Number of conversations.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    num_speakers: usize,
    #[arg(long, default_value_t = 200)]
    num_posts: usize,
    /// Fraction of speakers in faction A.
    #[arg(long, default_value_t = 0.5)]
    faction_split: f64,
    /// Probability that a reply crosses factions.
    #[arg(long, default_value_t = 0.9)]
    p_cross: f64,
    /// Probability that a post quotes a speaker.
    #[arg(long, default_value_t = 0.0)]
    p_quote: f64,
    /// Exponent on speaker activity when choosing whom to reply to.
    #[arg(long, default_value_t = 1.0)]
    bias: f64,
    /// Every reply targets the root post.
    #[arg(long)]
    root_only: bool,
    #[arg(long, default_value = "synthetic")]
    topic: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(c) => cmd_run::run(&c.inputs, &c.opts),
        Command::Eval(c) => cmd_eval::run(&c.corpus, &c.partitions, &c.gold, &c.opts),
        Command::Gen(c) => cmd_gen::run(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
