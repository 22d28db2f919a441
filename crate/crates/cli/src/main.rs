//! `cacc`: train, evaluate, and probe the decentralized CACC platoon
//! learners from the command line.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 runtime abort.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use cacc_core::env::ScenarioKind;
use commands::CmdError;

#[derive(Parser)]
#[command(name = "cacc", version, about = "Decentralized MARL workbench for cooperative adaptive cruise control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Catchup,
    Slowdown,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(value: ScenarioArg) -> Self {
        match value {
            ScenarioArg::Catchup => ScenarioKind::Catchup,
            ScenarioArg::Slowdown => ScenarioKind::Slowdown,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train learners per seed and write logs, checkpoints, and a summary
    /// table to the output directory.
    #[command(after_help = config::CONFIG_KEY_HELP)]
    Train {
        /// Experiment config file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Override one config key, e.g. --set consensus.mode=none.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Shorthand for --set trainer.seeds=N.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (one per experiment).
        #[arg(long, default_value = "cacc-out")]
        out: PathBuf,
    },
    /// Greedy evaluation of a trained checkpoint; prints an EvalMetrics CSV.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 1000)]
        seed_base: u64,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical bias / error / wire-cost table of the stochastic quantizer
    /// across resolutions (plus the n = 0 raw baseline row).
    Quantbench {
        #[arg(long)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        resolutions: Vec<u16>,
        #[arg(long, default_value_t = 20000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantized chain-graph consensus on synthetic quadratics; reports the
    /// disagreement trajectory and the distance to the analytic optimum.
    ConsensusDemo {
        #[arg(long, default_value_t = 8)]
        agents: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        /// Quantization resolution n; 0 exchanges raw vectors.
        #[arg(long, default_value_t = 0)]
        resolution: u16,
        #[arg(long, default_value_t = 5000)]
        iters: u64,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the trajectory CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Train {
            config,
            set,
            seed,
            out,
        } => commands::train::run(&config, &set, seed, &out),
        Command::Eval {
            checkpoint,
            scenario,
            episodes,
            seed_base,
            out,
        } => commands::eval::run(
            &checkpoint,
            scenario.into(),
            episodes,
            seed_base,
            out.as_deref(),
        ),
        Command::Quantbench {
            dim,
            resolutions,
            trials,
            seed,
            out,
        } => commands::quantbench::run(dim, &resolutions, trials, seed, out.as_deref()),
        Command::ConsensusDemo {
            agents,
            epsilon,
            lambda,
            resolution,
            iters,
            dim,
            seed,
            out,
        } => commands::consensus_demo::run(
            agents,
            epsilon,
            lambda,
            resolution,
            iters,
            dim,
            seed,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
