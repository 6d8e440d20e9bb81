use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use univport_cli::{run, Scenario};

#[derive(Parser)]
#[command(name = "univport", version, about = "Universal-portfolio experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cover's portfolio on the two-stock counterexample path.
    Counterexample(RunArgs),
    /// Universal prior over a family on an ergodic market.
    Universality(RunArgs),
    /// Wealth concentration and rate-function diagnostics.
    Ldp(RunArgs),
    /// Defining inequality of generated portfolios and the Cover value identity.
    FgpVerify(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables and the manifest.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::Counterexample(a) => (Scenario::Counterexample, a),
        Command::Universality(a) => (Scenario::Universality, a),
        Command::Ldp(a) => (Scenario::Ldp, a),
        Command::FgpVerify(a) => (Scenario::FgpVerify, a),
    };
    match run(scenario, &args.config, &args.out, args.seed) {
        Ok(outcome) => {
            for (name, value) in &outcome.summary {
                println!("{name} = {value:e}");
            }
            for note in &outcome.notes {
                println!("{note}");
            }
            println!("{}: {}", scenario.name(), if outcome.passed { "pass" } else { "FAIL" });
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
