use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swipt_das::harness::{
    self, csv_bytes, ExperimentConfig, RegionOptions, VerifyOptions, SEED_ENV,
};
use swipt_das::metrics::{ps_ratio_for_wet, wit_rate};
use swipt_das::par::Execution;
use swipt_das::Result;

#[derive(Parser)]
#[command(
    name = "swipt-das",
    version,
    about = "Power allocation for SWIPT in energy-trading distributed antenna systems"
)]
struct Cli {
    /// Overrides the seed of configs and generative instances.
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// Run trials on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print or write the allocation as JSON.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo averages for every grid point and policy.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired policy comparison with per-trial dominance counts.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rate-energy trade-off curve of one instance.
    Region {
        instance: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        xi: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 1.0)]
        tau2: f64,
        /// Report the splitting ratio that still harvests this much energy.
        #[arg(long)]
        qmin: Option<f64>,
    },
    /// Check the solver against the oracles on random instances.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 21)]
        grid_steps: usize,
        #[arg(long, default_value_t = 1e-4)]
        max_gap: f64,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Solve { instance, out } => {
            let doc = harness::run_solve(&instance, cli.seed)?;
            let json = doc.to_json()?;
            match out {
                Some(path) => harness::write_file(&path, json.as_bytes())?,
                None => io::stdout().write_all(json.as_bytes())?,
            }
        }
        Command::Sweep { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let records = harness::run_sweep(&cfg, exec)?;
            let bytes = csv_bytes(|buf| harness::write_sweep_csv(buf, &records))?;
            harness::write_file(&out, &bytes)?;
        }
        Command::Compare { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let records = harness::run_compare(&cfg, exec)?;
            let bytes = csv_bytes(|buf| harness::write_compare_csv(buf, &records))?;
            harness::write_file(&out, &bytes)?;
            let violations: usize = records.iter().map(|r| r.dominance_violations).sum();
            if violations > 0 {
                eprintln!("{violations} trials where a baseline beat the optimal allocation");
                return Ok(ExitCode::from(1));
            }
        }
        Command::Region {
            instance,
            points,
            out,
            xi,
            sigma2,
            tau2,
            qmin,
        } => {
            let opts = RegionOptions { xi, sigma2, tau2 };
            let (objective, curve) = harness::run_region(&instance, cli.seed, points, opts)?;
            let bytes = csv_bytes(|buf| harness::write_region_csv(buf, &curve))?;
            harness::write_file(&out, &bytes)?;
            if let Some(q) = qmin {
                let rho = ps_ratio_for_wet(q, objective, xi, sigma2)?;
                let rate = wit_rate(objective, rho, sigma2, tau2)?;
                println!(
                    "qmin={} rho={} wit={}",
                    harness::format_number(q),
                    harness::format_number(rho),
                    harness::format_number(rate)
                );
            }
        }
        Command::Verify {
            config,
            grid_steps,
            max_gap,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            let opts = VerifyOptions {
                grid_steps,
                max_gap,
                ..Default::default()
            };
            let report = harness::run_verify(&cfg, opts, exec)?;
            let mut json = serde_json::to_string_pretty(&report)?;
            json.push('\n');
            io::stdout().write_all(json.as_bytes())?;
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
