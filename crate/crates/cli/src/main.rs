mod cmd;
mod config;
mod inputs;
mod records;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use osearch::cycles::RankKey;
use osearch::exec::{set_thread_cap, Exec};

#[derive(Parser)]
#[command(name = "osearch", version, about = "Output-space search over cellular-automaton seeds")]
struct Cli {
    /// Worker thread cap (0 = one per core).
    #[arg(long, global = true, env = "OSEARCH_THREADS", default_value_t = 0)]
    threads: usize,

    /// Run every data-parallel stage sequentially.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded library of 16x16 seed files.
    GenSeeds {
        #[arg(long, default_value_t = osearch::corpus::DEFAULT_LIBRARY_SIZE)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit output-space models over a corpus and keep the preferred one.
    FitZ(cmd::fit::Args),
    /// Project seeds under a model and write an exemplar library.
    BuildLib(cmd::library::Args),
    /// Score seed files with CA++.
    Score {
        /// Seed files or directories of `*.txt` seeds.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Add transient/cycle statistics under every benchmark rule.
        #[arg(long)]
        cycles: bool,
        #[arg(long, default_value_t = osearch::cycles::DEFAULT_MAX_STEPS)]
        max_steps: usize,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid, random or BO target search from a run config.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Control metrics and cycle rankings from earlier outputs.
    Diag(cmd::diag::Args),
    /// Transient/cycle decomposition of seed files under one rule.
    Cycles {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "Life")]
        rule: String,
        #[arg(long, default_value_t = osearch::cycles::DEFAULT_MAX_STEPS)]
        max_steps: usize,
        #[arg(long, value_enum, default_value = "t-repeat")]
        rank_by: RankArg,
        /// Print the top entries of the ranking.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum RankArg {
    TRepeat,
    Lambda,
}

impl From<RankArg> for RankKey {
    fn from(r: RankArg) -> Self {
        match r {
            RankArg::TRepeat => RankKey::TRepeat,
            RankArg::Lambda => RankKey::Lambda,
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        set_thread_cap(cli.threads);
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match cli.command {
        Command::GenSeeds { count, seed, out } => cmd::score::gen_seeds(count, seed, &out),
        Command::FitZ(args) => cmd::fit::run(&args, exec),
        Command::BuildLib(args) => cmd::library::run(&args, exec),
        Command::Score {
            paths,
            cycles,
            max_steps,
            out,
        } => cmd::score::run(&paths, cycles, max_steps, out.as_deref(), exec),
        Command::Search { config, out } => cmd::search::run(&config, &out, exec),
        Command::Diag(args) => cmd::diag::run(&args),
        Command::Cycles {
            paths,
            rule,
            max_steps,
            rank_by,
            top,
            out,
        } => cmd::score::cycles(&paths, &rule, max_steps, rank_by.into(), top, &out, exec),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
