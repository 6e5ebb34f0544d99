//! `splitfun`: run Monte Carlo experiments and diagnostics from config files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use splitfun::harness::diag::{append_diag, run_diag, DiagConfig, DiagKind};
use splitfun::harness::{run_experiment, ExperimentConfig, ExperimentOutput};
use splitfun::Error;

#[derive(Parser, Debug)]
#[command(name = "splitfun", version, about = "Sample-split Taylor estimators: experiments and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Overrides {
    /// Master seed, replacing the one in the config.
    #[arg(long, env = "SPLITFUN_SEED")]
    seed: Option<u64>,
    /// Output directory, replacing the one in the config.
    #[arg(long, env = "SPLITFUN_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write its CSV and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Worker threads (0 = machine default).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run several experiments; each writes `<config stem>.csv`.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Diagnostics of the model's base estimator, appended to `diag.csv`.
    Diag {
        /// Experiment or model file providing `[model]`, `n_grid` and `d_rule`.
        #[arg(long, alias = "model")]
        config: PathBuf,
        /// One of ap_dp, tail, wass, rank.
        #[arg(long)]
        what: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load(path: &Path, overrides: &Overrides, workers: Option<usize>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = overrides.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.outputs.dir = out.clone();
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

/// Writes outputs and reports failed cells; returns whether all cells passed.
fn finish(out: &ExperimentOutput, dir: &Path, name: &str) -> Result<bool, Failure> {
    let path = out.write(dir, name).with_context(|| format!("writing results to {}", dir.display()))?;
    print!("{}", out.summary);
    println!("wrote {}", path.display());
    for f in &out.failures {
        eprintln!(
            "error: cell n={} failed ({}/{} replications): {}",
            f.n, f.failed, f.reps, f.first_error
        );
    }
    Ok(out.failures.is_empty())
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Run { config, overrides, workers } => {
            let cfg = load(&config, &overrides, workers)?;
            let out = run_experiment(&cfg)?;
            finish(&out, &cfg.outputs.dir, &cfg.outputs.name)
        }
        Command::Sweep { configs, overrides, workers } => {
            let loaded = configs
                .iter()
                .map(|p| load(p, &overrides, workers))
                .collect::<Result<Vec<_>, _>>()?;
            let mut ok = true;
            for (path, cfg) in configs.iter().zip(&loaded) {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
                log::info!("sweep: {}", path.display());
                let out = run_experiment(cfg)?;
                ok &= finish(&out, &cfg.outputs.dir, &format!("{stem}.csv"))?;
            }
            Ok(ok)
        }
        Command::Diag { config, what, overrides } => {
            let kind = DiagKind::parse(&what)?;
            let mut cfg = DiagConfig::from_file(&config)?;
            if let Some(seed) = overrides.seed {
                cfg.master_seed = seed;
            }
            let dir = overrides.out.unwrap_or_else(|| PathBuf::from("out"));
            let rows = run_diag(&cfg, kind)?;
            let path = dir.join("diag.csv");
            append_diag(&path, &rows)?;
            for r in &rows {
                let p = r.p.map(|p| format!(" p={p}")).unwrap_or_default();
                println!("{} n={} d={}{p} {}={} {}", r.what, r.n, r.d, r.name, r.value, r.label);
            }
            println!("appended {} rows to {}", rows.len(), path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
