//! `prune-dc`: theory and Monte-Carlo experiments for pruning
//! overparameterized least-squares models.
//!
//! Every run is driven by a seed and a resolved configuration; output is a
//! CSV table (and a JSON manifest next to it) that is byte-identical across
//! repeated runs and thread counts.

mod commands;
mod config;
mod model_spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Config;
use prune_dc_core::report::RiskReport;

#[derive(Parser)]
#[command(name = "prune-dc", version, about = "Pruning risk experiments for overparameterized least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed (required here or in the config; no wall-clock default).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output CSV path; stdout when omitted. A `<out>.manifest.json` sidecar
    /// records the config hash, seed, and version.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Monte-Carlo trials per grid point.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads (default: all cores; `PRUNE_DC_THREADS` as fallback).
    /// Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Number of features.
    #[arg(long)]
    p: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Covariance: identity | spiked | diag-file:PATH | dense-file:PATH.
    #[arg(long)]
    cov: Option<String>,
    /// Spike strength C for the spiked profile.
    #[arg(long)]
    spike_c: Option<f64>,
    /// Spiked fraction of coordinates.
    #[arg(long)]
    spike_frac: Option<f64>,
    /// Spiked variant: fig1a | fig1b.
    #[arg(long)]
    variant: Option<String>,
    /// Latent spec: ones | sqrt-lambda | file:PATH.
    #[arg(long)]
    beta: Option<String>,
    /// Sparsity fraction s/p.
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated fitted-feature counts; default is a log-spaced grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Size of the default grid.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

#[derive(Args, Default)]
struct RfArgs {
    /// Input dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated feature counts.
    #[arg(long = "p-list", value_delimiter = ',')]
    p_list: Option<Vec<usize>>,
    /// Comma-separated sparsity targets.
    #[arg(long = "s-list", value_delimiter = ',')]
    s_list: Option<Vec<usize>>,
    /// Input-layer realizations.
    #[arg(long)]
    trials_r: Option<usize>,
    /// Data draws per realization.
    #[arg(long)]
    trials_data: Option<usize>,
    /// Moment-estimation budget per realization.
    #[arg(long)]
    estimation_samples: Option<usize>,
    /// Draws for the sampled pruning prediction.
    #[arg(long)]
    dc_samples: Option<usize>,
    /// Support draws for the retraining prediction.
    #[arg(long)]
    retrain_supports: Option<usize>,
}

#[derive(Args, Default)]
struct DcSampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of draws from the fitted law.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Default)]
struct RidgeArgs {
    /// Aspect ratio p/n.
    #[arg(long)]
    pbar: Option<f64>,
    /// Rescaled regularizer lambda / (p/n).
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args, Default)]
struct RankOneArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Kept coordinates after pruning.
    #[arg(long)]
    s: Option<usize>,
    /// Direction spec: ones | linear | file:PATH.
    #[arg(long)]
    lambda_spec: Option<String>,
    /// Latent spec relative to the direction: ones | sqrt-lambda | file:PATH.
    #[arg(long)]
    beta: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form risk predictions over a feature sweep.
    TheorySweep(ModelArgs),
    /// Monte-Carlo risks over a feature sweep, with theory columns.
    McSweep(ModelArgs),
    /// Random-features regression vs the matched-moments prediction.
    RfExperiment(RfArgs),
    /// Sample the finite-p fitted law: dense, pruned, retrained risks.
    DcSample(DcSampleArgs),
    /// Closed-form ridge shrinkage coefficient.
    RidgeGamma(RidgeArgs),
    /// Rank-one covariance pruning/retraining excess risks.
    RankOne(RankOneArgs),
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::TheorySweep(_) => "theory-sweep",
            Command::McSweep(_) => "mc-sweep",
            Command::RfExperiment(_) => "rf-experiment",
            Command::DcSample(_) => "dc-sample",
            Command::RidgeGamma(_) => "ridge-gamma",
            Command::RankOne(_) => "rank-one",
        }
    }
}

macro_rules! merge {
    ($cfg:ident, $args:ident: $($field:ident),+ $(,)?) => {
        $(if let Some(v) = &$args.$field { $cfg.$field = v.clone(); })+
    };
}

fn apply_model_args(cfg: &mut Config, args: &ModelArgs) {
    merge!(cfg, args: p, n, sigma, cov, spike_c, spike_frac, variant, beta, alpha,
           grid, grid_points, methods);
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    cfg.kind = cli.command.kind().to_string();
    match &cli.command {
        Command::TheorySweep(args) | Command::McSweep(args) => apply_model_args(&mut cfg, args),
        Command::RfExperiment(args) => {
            merge!(cfg, args: d, n, p_list, s_list, trials_r, trials_data,
                   estimation_samples, dc_samples, retrain_supports);
        }
        Command::DcSample(args) => {
            apply_model_args(&mut cfg, &args.model);
            merge!(cfg, args: samples);
        }
        Command::RidgeGamma(args) => {
            merge!(cfg, args: pbar, lambda);
        }
        Command::RankOne(args) => {
            merge!(cfg, args: p, n, sigma, s, lambda_spec, beta);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    Ok(cfg)
}

fn init_threads(cli: &Cli) -> Result<()> {
    let threads = cli.threads.or_else(|| {
        std::env::var("PRUNE_DC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the thread pool")?;
    }
    Ok(())
}

fn write_output(cli: &Cli, cfg: &Config, report: &mut RiskReport) -> Result<()> {
    // Seedless kinds (pure closed forms) record seed 0.
    report.manifest = Some(prune_dc_core::report::Manifest {
        config_hash: cfg.hash(),
        seed: cfg.seed.unwrap_or(0),
        version: env!("CARGO_PKG_VERSION").to_string(),
    });
    let csv = report.to_csv();
    match &cli.out {
        None => print!("{csv}"),
        Some(path) => {
            std::fs::write(path, csv)
                .with_context(|| format!("writing {}", path.display()))?;
            let manifest = report.manifest.as_ref().expect("set above");
            let json = serde_json::json!({
                "config_hash": manifest.config_hash,
                "seed": manifest.seed,
                "version": manifest.version,
            });
            let mut manifest_path = path.clone().into_os_string();
            manifest_path.push(".manifest.json");
            std::fs::write(&manifest_path, format!("{json:#}\n"))
                .with_context(|| "writing the run manifest")?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    init_threads(cli)?;
    let cfg = resolve_config(cli)?;
    let mut report = match cfg.kind.as_str() {
        "theory-sweep" => commands::theory_sweep(&cfg)?,
        "mc-sweep" => commands::mc_sweep_cmd(&cfg)?,
        "rf-experiment" => commands::rf_experiment(&cfg)?,
        "dc-sample" => commands::dc_sample(&cfg)?,
        "ridge-gamma" => commands::ridge_gamma_cmd(&cfg)?,
        "rank-one" => commands::rank_one(&cfg)?,
        other => anyhow::bail!("unknown kind {other:?}"),
    };
    write_output(cli, &cfg, &mut report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One line, no backtrace chain noise.
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
