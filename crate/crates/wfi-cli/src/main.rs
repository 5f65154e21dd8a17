use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wfi_cli::{exit_code, run, Command};

#[derive(Parser)]
#[command(
    name = "wfi",
    version,
    about = "Wavefield inversion pipelines: synthesis, reconstruction, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a manufactured wavefield dataset
    Synth(RunOpts),
    /// Reconstruct coefficients from spectrally differentiated data
    InvertDirect(RunOpts),
    /// Joint surrogate + coefficient training on misfit and residual
    InvertPinn(RunOpts),
    /// Synthesize a dispersive line record and extract its ridge
    Dispersion(RunOpts),
    /// Fit per-region stiffness and report the PDE-balance discrepancy
    VerifyBalance(RunOpts),
}

#[derive(Args)]
struct RunOpts {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    /// Override the config's global seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Cmd::Synth(o) => (Command::Synth, o),
        Cmd::InvertDirect(o) => (Command::InvertDirect, o),
        Cmd::InvertPinn(o) => (Command::InvertPinn, o),
        Cmd::Dispersion(o) => (Command::Dispersion, o),
        Cmd::VerifyBalance(o) => (Command::VerifyBalance, o),
    };
    let result = run(command, &opts.config, &opts.out, opts.seed);
    if let Err(err) = &result {
        eprintln!("error: {err}");
    }
    std::process::exit(exit_code(&result));
}
