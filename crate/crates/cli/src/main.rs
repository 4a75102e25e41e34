use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use failaware::commands::{run, Command, Options};

#[derive(Parser)]
#[command(name = "failaware", version, about = "Failure-aware re-decision experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a task dataset.
    GenData(Common),
    /// Train the base policy by behavior cloning.
    TrainBc(Common),
    /// Train a failure-aware head on a behavior-cloned checkpoint.
    TrainFa(Common),
    /// Evaluate policies and write CSV and JSON reports.
    Eval(Common),
    /// Train and evaluate policies across a task parameter.
    Sweep(Common),
    /// Render SVG charts from a report CSV.
    Plot(Common),
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config (default `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = match cli.command {
        Cmd::GenData(a) => (Command::GenData, a),
        Cmd::TrainBc(a) => (Command::TrainBc, a),
        Cmd::TrainFa(a) => (Command::TrainFa, a),
        Cmd::Eval(a) => (Command::Eval, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Plot(a) => (Command::Plot, a),
    };
    let opts = Options {
        config: args.config,
        seed: args.seed,
        out: args.out,
        threads: args.threads,
    };
    match run(cmd, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
