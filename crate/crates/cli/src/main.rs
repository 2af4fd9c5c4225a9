mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

/// Exit status when a verified bound fails.
const EXIT_FAIL: u8 = 1;
/// Exit status for an unreadable or invalid configuration.
const EXIT_CONFIG: u8 = 2;
/// Exit status for errors during a run.
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(name = "ltlab", version, about = "Eigenvalue bounds for complex random potentials, checked on a grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Filtered discrete spectrum of -Delta - V as CSV.
    Spectrum,
    /// Run the bound selected by `experiment.bound` and write the reports.
    Verify,
    /// Random versus deterministic extension-norm scaling over `experiment.r_list`.
    Campaign,
    /// Singular values of the sandwich operator on the sphere net.
    Svd,
    /// Size and spacing of the sphere net.
    NetInfo,
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let Some(path) = &cli.config else {
        anyhow::bail!("--config is required");
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        match cfg.omega.as_mut() {
            Some(o) => o.master_seed = seed,
            None => eprintln!("warning: --seed ignored, the config has no omega section"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("config error: --workers: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let hash = cfg.hash();
    let result = match cli.command {
        Command::Spectrum => commands::spectrum_cmd(&cfg, &hash),
        Command::Verify => commands::verify_cmd(&cfg, &hash),
        Command::Campaign => commands::campaign_cmd(&cfg, &hash),
        Command::Svd => commands::svd_cmd(&cfg, &hash),
        Command::NetInfo => commands::net_info_cmd(&cfg, &hash),
    };
    match result {
        Ok(o) => {
            for f in &o.files {
                eprintln!("wrote {}", f.display());
            }
            if o.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUN)
        }
    }
}
