use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;
mod methods;

use config::Settings;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "pcombine", version, about = "Combine independent p-values, calibrate null tables and run power simulations")]
pub struct Cli {
    /// Master seed for every random draw
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (outputs do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory of cached null tables
    #[arg(long, global = true, env = "PCOMBINE_TABLE_DIR")]
    table_dir: Option<PathBuf>,

    /// TOML file with default settings; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Monte Carlo replicates per null table
    #[arg(long = "B", visible_alias = "b", global = true)]
    b: Option<usize>,

    /// Cap on B*K per null table
    #[arg(long, global = true)]
    max_cells: Option<u128>,

    /// FE / FE_CS calibration: cauchy or mc
    #[arg(long, global = true)]
    ensemble_calibration: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Combine rows of p-values
    Combine(commands::combine::Args),
    /// Build or load a null table and print critical values
    Table(commands::table::Args),
    /// Power grid simulation
    Simulate(commands::simulate::Args),
    /// Per-feature meta-analysis over study CSVs
    Meta(commands::meta::Args),
    /// Write a synthetic multi-study data set
    Synth(commands::synth::Args),
    /// Empirical exact slopes
    Slope(commands::slope::Args),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::resolve(&cli)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Combine(a) => commands::combine::run(a, &settings),
        Command::Table(a) => commands::table::run(a, &settings),
        Command::Simulate(a) => commands::simulate::run(a, &settings),
        Command::Meta(a) => commands::meta::run(a, &settings),
        Command::Synth(a) => commands::synth::run(a, &settings),
        Command::Slope(a) => commands::slope::run(a, &settings),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
