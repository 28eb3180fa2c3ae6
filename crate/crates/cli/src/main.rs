use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stfm_cli::config::SCHEMA;
use stfm_cli::{run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "stfm", version, about = "Multi-level tensor factor models for seasonal panels", after_long_help = SCHEMA)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Forecast length for `forecast`.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Read provider CSVs and write the folded tensor archive.
    Ingest,
    /// Eigenvalue-ratio rank selection.
    Ranks,
    /// Fit the model and write model.json.
    Fit,
    /// Forecast from model.json.
    Forecast,
    /// Rolling-window evaluation of the model and benchmarks.
    Backtest,
    /// Draw a synthetic archive and its ground truth.
    Simulate,
    /// Render report.md from report.json.
    Report,
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Overrides {
        horizon: cli.horizon,
        seed: cli.seed,
        out: cli.out.clone(),
    }
    .apply(&mut cfg);
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cmd = match cli.command {
        Cmd::Ingest => Command::Ingest,
        Cmd::Ranks => Command::Ranks,
        Cmd::Fit => Command::Fit,
        Cmd::Forecast => Command::Forecast,
        Cmd::Backtest => Command::Backtest,
        Cmd::Simulate => Command::Simulate,
        Cmd::Report => Command::Report,
    };
    run(cmd, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
