use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spin_collapse_cli::commands::worker_cap_from_env;
use spin_collapse_cli::{load_config, run, CliError, CliResult, Experiment, FileConfig, Overrides, RunConfig};

/// Stochastic collapse simulations of a driven spin-½.
#[derive(Parser)]
#[command(name = "spin-collapse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML config file. Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory; write its time series and Bloch path.
    #[command(allow_negative_numbers = true)]
    Trajectory(Common),
    /// Simulate an ensemble; write statistics, events and mean series.
    #[command(allow_negative_numbers = true)]
    Ensemble(Common),
    /// Run one ensemble per γ in `sweep.gammas`.
    #[command(allow_negative_numbers = true)]
    Sweep(Common),
    /// Check weak convergence, the martingale property and the closed form.
    #[command(allow_negative_numbers = true)]
    Validate(Common),
    /// Evaluate the closed-form density matrix and optional scalar estimates.
    #[command(allow_negative_numbers = true)]
    Analytic(Common),
}

fn execute(cli: Cli) -> CliResult<()> {
    let (experiment, common) = match cli.command {
        Command::Trajectory(c) => (Experiment::Trajectory, c),
        Command::Ensemble(c) => (Experiment::Ensemble, c),
        Command::Sweep(c) => (Experiment::Sweep, c),
        Command::Validate(c) => (Experiment::Validate, c),
        Command::Analytic(c) => (Experiment::Analytic, c),
    };
    let file = match &common.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    let config = RunConfig::resolve(experiment, file, &common.overrides)?;
    let cap = worker_cap_from_env()?;
    let summary = run(&config, cap)?;
    for line in &summary.lines {
        println!("{line}");
    }
    for path in &summary.files {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            debug_assert!(code != 0);
            ExitCode::from(u8::try_from(code).unwrap_or(CliError::EXIT_OTHER as u8))
        }
    }
}
