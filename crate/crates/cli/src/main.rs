use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use snmarg_cli::{run, workers_from_env, Command, Options, Result, RunConfig};

#[derive(Parser)]
#[command(name = "snmarg", version, about = "Spatiotemporal gamma shot-noise Cox process toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate latent path and points from the configured model
    Simulate(Common),
    /// Run the particle Gibbs sampler on the configured data
    Fit(Common),
    /// Intensity, first-order and pair-correlation grids
    Analyze(Common),
    /// Posterior predictive forecast past the last step
    Forecast(Common),
    /// In-sample fit diagnostics
    Diagnose(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: current directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Command, args: Common) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let opts = Options { out: args.out.unwrap_or_else(|| PathBuf::from(".")), workers: workers_from_env()? };
    for p in run(command, &cfg, &opts)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Forecast(a) => (Command::Forecast, a),
        Cmd::Diagnose(a) => (Command::Diagnose, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("snmarg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
