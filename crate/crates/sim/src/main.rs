//! `ramp`: Monte-Carlo driver for the message-passing uplink allocator.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use ramp_sim::config::{Algorithm, ExperimentConfig};
use ramp_sim::experiments;
use ramp_sim::output::emit_results;

#[derive(Parser)]
#[command(name = "ramp", version, about = "Uplink resource allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average total transmit power versus the number of users (uncapped).
    Power(RunArgs),
    /// Outage probability versus the per-user power cap.
    Outage(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for the trial generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or jsonl.
    #[arg(long)]
    format: Option<String>,
    /// Comma-separated algorithm list (mp, brcg, lp).
    #[arg(long)]
    algorithms: Option<String>,
    /// Dump per-round messages of one MP trial as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<(ExperimentConfig, Option<PathBuf>)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(out) = &self.out {
            cfg.out = out.display().to_string();
        }
        if let Some(format) = &self.format {
            cfg.format = format.parse()?;
        }
        if let Some(list) = &self.algorithms {
            cfg.algorithms = list
                .split(',')
                .map(|s| s.trim().parse::<Algorithm>())
                .collect::<Result<Vec<_>>>()?;
        }
        cfg.validate()?;
        Ok((cfg, self.trace))
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Power(args) => {
            let (cfg, trace) = args.into_config()?;
            if let Some(path) = trace {
                experiments::trace_one_trial(&cfg, f64::INFINITY, &path)?;
                eprintln!("trace written to {}", path.display());
            }
            let (_, rows) = experiments::run_power_experiment(&cfg)?;
            emit_results(&rows, cfg.out.as_ref(), cfg.format)?;
            eprintln!("{} rows written to {}", rows.len(), cfg.out);
        }
        Command::Outage(args) => {
            let (cfg, trace) = args.into_config()?;
            let (cells, rows) = experiments::run_outage_experiment(&cfg)?;
            if let Some(path) = trace {
                let first_cap = cells.first().map(|c| c.p_max).unwrap_or(f64::INFINITY);
                experiments::trace_one_trial(&cfg, first_cap, &path)?;
                eprintln!("trace written to {}", path.display());
            }
            emit_results(&rows, cfg.out.as_ref(), cfg.format)?;
            eprintln!("{} rows written to {}", rows.len(), cfg.out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
