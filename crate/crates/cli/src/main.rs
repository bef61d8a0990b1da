mod args;
mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{bound, complexity, discrete, experiment, verify};
use config::FileConfig;
use error::CliError;
use output::Ctx;

const DEFAULT_OUT: &str = "advhdh-reports";

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {n} worker threads: {e}")))?;
    }
    let ctx = Ctx {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        out: cli.out.or(file.out).unwrap_or_else(|| DEFAULT_OUT.into()),
        timestamp: !(cli.no_timestamp || file.no_timestamp.unwrap_or(false)),
    };
    match cli.command {
        Command::Complexity(a) => complexity::run(&ctx, a.or(file.complexity)),
        Command::Bound(a) => bound::run(&ctx, a.or(file.bound)),
        Command::SubsetSum(a) => discrete::subset_sum(&ctx, a.or(file.subset_sum)),
        Command::TransferCheck(a) => discrete::transfer_check(&ctx, a.or(file.transfer_check)),
        Command::Train(a) => {
            let flags = a.flags.clone().or(file.training);
            experiment::train_cmd(&ctx, a.or(file.train), flags)
        }
        Command::Sweep(a) => {
            let flags = a.flags.clone().or(file.training);
            experiment::sweep(&ctx, a.or(file.sweep), flags, file.domains)
        }
        Command::Verify(a) => verify::run(&ctx, a.or(file.verify)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
