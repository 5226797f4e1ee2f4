use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vacqnet_cli::{
    run_analyze, run_frontier, run_simulate, run_simulate_with_events, run_sweep, CliError, RunConfig,
};

#[derive(Parser)]
#[command(name = "vacqnet", version, about = "Prioritized uplink IoT traffic: analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-point solution and per-class metrics for one configuration.
    Analyze(Common),
    /// Analyze over a grid of one parameter.
    Sweep(Common),
    /// Largest stable value of one parameter along a grid of another.
    Frontier(Common),
    /// Monte Carlo campaign.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write one CSV row per measured departure.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Master seed for simulations; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "VACQNET_THREADS")]
    threads: Option<usize>,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Analyze(c) | Command::Sweep(c) | Command::Frontier(c) => c,
        Command::Simulate { common, .. } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let config = RunConfig::from_file(&common.config)?;
    match &cli.command {
        Command::Analyze(c) => write(&c.out, &run_analyze(&config)?),
        Command::Sweep(c) => write(&c.out, &run_sweep(&config)?),
        Command::Frontier(c) => write(&c.out, &run_frontier(&config)?),
        Command::Simulate { common, events: None } => write(&common.out, &run_simulate(&config, common.seed)?),
        Command::Simulate {
            common,
            events: Some(path),
        } => {
            let (summary, events) = run_simulate_with_events(&config, common.seed)?;
            write(&common.out, &summary)?;
            write(path, &events)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vacqnet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
