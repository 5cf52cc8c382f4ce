//! `elastic`: train, evaluate, and compare variable time-step driving agents.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod sink;

use config::AlgoName;

#[derive(Parser)]
#[command(name = "elastic", version, about = "Variable time-step RL on a planar car")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train an agent and write metrics, checkpoints, and the resolved config.
    Train {
        /// Flat key = value config file; # starts a comment.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the algorithm from the config.
        #[arg(long)]
        algo: Option<AlgoName>,
        /// Override the master seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; everything the run writes lands here.
        #[arg(long)]
        out: PathBuf,
        /// Override the episode count from the config.
        #[arg(long)]
        episodes: Option<usize>,
        /// Store replayed rewards exactly as collected instead of
        /// recomputing them from the live reward scale.
        #[arg(long)]
        literal_reward_storage: bool,
    },
    /// Roll out a trained checkpoint with the mean policy and write per-episode records.
    Eval {
        /// Agent checkpoint bundle (ckpt_*.bin from a training run).
        #[arg(long)]
        ckpt: PathBuf,
        /// Config file for the track and car; defaults match training defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Episodes to roll out.
        #[arg(long, default_value_t = 30)]
        episodes: usize,
        /// Base seed; episode i resets with seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; any value produces byte-identical output.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Paired comparison of two evaluation CSVs from the same seed base.
    Compare {
        /// First evaluation CSV; the file stem names the method.
        a: PathBuf,
        /// Second evaluation CSV.
        b: PathBuf,
        /// Write the report CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in consistency suites and report pass/fail per suite.
    Selfcheck {
        /// Seed for the randomized probes.
        #[arg(long, default_value_t = 0x5e1f)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train { config, algo, seed, out, episodes, literal_reward_storage } => {
            commands::cmd_train(config, algo, seed, out, episodes, literal_reward_storage)
        }
        Cmd::Eval { ckpt, config, out, episodes, seed, workers } => {
            commands::cmd_eval(ckpt, config, out, episodes, seed, workers)
        }
        Cmd::Compare { a, b, out } => commands::cmd_compare(a, b, out),
        Cmd::Selfcheck { seed } => commands::cmd_selfcheck(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
