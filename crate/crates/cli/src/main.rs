//! `lagloop`: command-line driver for the loop-group pipeline.
//!
//! Exit status: 0 success, 2 configuration, 3 resonance, 4 factorization or
//! other numerical failure, 5 failed verification under `--strict`.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use lagloop_core::Error;

use args::{Cli, Command};
use commands::StrictFailure;

const THREADS_VAR: &str = "LAGLOOP_THREADS";

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<StrictFailure>().is_some() {
        return 5;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Resonant { .. }) => 3,
        Some(Error::InvalidParams(_) | Error::Config(_) | Error::OnBranchCut { .. } | Error::OutOfDomain { .. }) => 2,
        Some(_) => 4,
        None => 2,
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    init_threads()?;
    let g = &cli.global;
    match &cli.command {
        Command::Delaunay(a) => commands::delaunay(g, a),
        Command::Perturb(a) => commands::perturb(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::Verify(a) => commands::verify(g, a),
        Command::Export(a) => commands::export(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
