use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsmrisk::config::{load_config, RunConfig};
use dsmrisk::pipeline::{cmd_analyze, cmd_gen_synthetic, cmd_impact, cmd_simulate};
use dsmrisk::synthetic::FixtureSize;
use dsmrisk::Error;

/// Generation-loss risk analysis for demand-side scenarios.
#[derive(Parser)]
#[command(name = "dsmrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic fixture set and a matching config.
    GenSynthetic {
        /// small or gb-like
        #[arg(long, default_value = "small")]
        size: FixtureSize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate ratings and run the removal sweep.
    Simulate(RunArgs),
    /// Price every simulated record with the economic model.
    Impact(RunArgs),
    /// Aggregate costs into curves, marginal costs and regional shares.
    Analyze(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = load_config(&self.config)?;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenSynthetic { size, seed, out } => {
            let config = cmd_gen_synthetic(size, seed, &out)?;
            println!("wrote {}", config.display());
        }
        Command::Simulate(args) => {
            let out = cmd_simulate(&args.load()?)?;
            println!("{} records -> {}", out.results.records.len(), out.results_path.display());
        }
        Command::Impact(args) => {
            let impacts = cmd_impact(&args.load()?)?;
            println!("priced {} records", impacts.len());
        }
        Command::Analyze(args) => {
            for p in cmd_analyze(&args.load()?)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
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
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
