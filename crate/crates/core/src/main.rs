use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pca_core::cli::{error_json, load_config, run, Command};

#[derive(Parser)]
#[command(name = "pca", version, about = "Probabilistic cellular automata experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Forward simulation with a space-time image.
    Simulate(RunArgs),
    /// Exact samples of the invariant measure on a window.
    Sample(RunArgs),
    /// Decay, entropy and correlation curves.
    Diagnose(RunArgs),
    /// Character-basis contraction of noisy XOR / AND rules.
    Spectral(RunArgs),
    /// Approximate invariant cylinder probability.
    Invariant(RunArgs),
    /// Directed site percolation survival.
    Percolation(RunArgs),
    /// Envelope ergodicity certificate.
    Certify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Sample(a) => (Command::Sample, a),
        Sub::Diagnose(a) => (Command::Diagnose, a),
        Sub::Spectral(a) => (Command::Spectral, a),
        Sub::Invariant(a) => (Command::Invariant, a),
        Sub::Percolation(a) => (Command::Percolation, a),
        Sub::Certify(a) => (Command::Certify, a),
    };
    let start = Instant::now();
    let result = load_config(&args.config).and_then(|mut config| {
        if let Some(s) = args.seed {
            config.seed = s;
        }
        run(command, &config, &args.out)
    });
    match result {
        Ok(outcome) => {
            let line = json!({
                "dir": outcome.dir,
                "files": outcome.files,
                "result": outcome.summary,
                "elapsed": start.elapsed().as_secs_f64(),
            });
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            println!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
