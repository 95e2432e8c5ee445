//! Command-line entry point: wiring configs to training, evaluation,
//! analysis, and parameter persistence.
//!
//! Every run takes a JSON config (`--config`), writes its outputs plus a
//! `manifest.json` into the run directory, and is fully reproducible from
//! that manifest (config hash + seed). Config errors exit with status 2 and
//! a field/line diagnostic; runtime failures exit with status 1.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use echocode::params::fnv1a64;

/// Environment variable holding the default output root when `--out` is not
/// given; outputs land under `<root>/<command>`.
const OUT_ROOT_ENV: &str = "ECHOCODE_OUT_ROOT";

#[derive(Parser)]
#[command(name = "echocode", version, about = "Feedback-codec toolkit: train, evaluate, analyze")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $ECHOCODE_OUT_ROOT/<command> or ./runs/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Train a parameter set from scratch.
    Train,
    /// Estimate the BER of a stored parameter set at one channel point.
    EvalBer,
    /// Estimate BER over an SNR grid.
    Sweep,
    /// Measure perturbation influence curves and lengths.
    Influence,
    /// Tabulate hidden-state outlier statistics.
    Outliers,
    /// Fit a piecewise-linear model to scatter data.
    PwlFit,
    /// Export parity-vs-noise scatter samples.
    Scatter,
    /// Train and evaluate all eight sign-variant systems.
    Variants,
    /// Recompute the frozen normalization constants of a params file.
    Calibrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::EvalBer => "eval-ber",
            Command::Sweep => "sweep",
            Command::Influence => "influence",
            Command::Outliers => "outliers",
            Command::PwlFit => "pwl-fit",
            Command::Scatter => "scatter",
            Command::Variants => "variants",
            Command::Calibrate => "calibrate",
        }
    }
}

/// Distinguishes bad input (exit 2) from runtime failure (exit 1).
struct ConfigError(anyhow::Error);

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_path: String,
    /// FNV-1a 64 hash of the raw config bytes.
    config_hash: String,
    /// Effective seed (after any --seed override); null for commands whose
    /// config carries no seed.
    seed: Option<u64>,
    version: &'a str,
    outputs: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Either::Config(ConfigError(e))) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Either::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

enum Either {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

fn execute(cli: &Cli) -> Result<(), Either> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Either::Runtime(e.into()))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Either::Config(ConfigError(anyhow::anyhow!("--config is required"))))?;
    let raw = std::fs::read(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))
        .map_err(|e| Either::Config(ConfigError(e)))?;
    let config_hash = fnv1a64(&raw);
    let config_dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let out_dir = match &cli.out {
        Some(d) => d.clone(),
        None => match std::env::var_os(OUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(cli.command.name()),
            None => PathBuf::from("runs").join(cli.command.name()),
        },
    };
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))
        .map_err(Either::Runtime)?;

    // Parse the config strictly; any serde error is a config error with
    // line/column context from serde_json.
    fn parse<T: serde::de::DeserializeOwned>(raw: &[u8]) -> Result<T, Either> {
        serde_json::from_slice(raw)
            .map_err(|e| Either::Config(ConfigError(anyhow::anyhow!("{e}"))))
    }

    let mut seed_used: Option<u64> = None;
    let outputs = match cli.command {
        Command::Train => {
            let mut cfg: echocode::trainer::TrainConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            cfg.validate().map_err(|e| Either::Config(ConfigError(e.into())))?;
            run::run_train(cfg, &out_dir).map_err(Either::Runtime)?
        }
        Command::EvalBer => {
            let mut cfg: config::EvalBerConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            run::run_eval_ber(cfg, &config_dir, &out_dir).map_err(classify)?
        }
        Command::Sweep => {
            let mut cfg: config::SweepConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            run::run_sweep(cfg, &config_dir, &out_dir).map_err(classify)?
        }
        Command::Influence => {
            let mut cfg: config::InfluenceConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            run::run_influence(cfg, &config_dir, &out_dir).map_err(classify)?
        }
        Command::Outliers => {
            let mut cfg: config::OutliersConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            run::run_outliers(cfg, &config_dir, &out_dir).map_err(classify)?
        }
        Command::PwlFit => {
            let cfg: config::PwlFitConfig = parse(&raw)?;
            run::run_pwl_fit(cfg, &config_dir, &out_dir).map_err(classify)?
        }
        Command::Scatter => {
            let mut cfg: config::ScatterConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            run::run_scatter(cfg, &config_dir, &out_dir).map_err(classify)?
        }
        Command::Variants => {
            let mut cfg: config::VariantsConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.train.seed = s;
            }
            seed_used = Some(cfg.train.seed);
            run::run_variants(cfg, &out_dir).map_err(classify)?
        }
        Command::Calibrate => {
            let mut cfg: config::CalibrateConfig = parse(&raw)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            seed_used = Some(cfg.seed);
            run::run_calibrate(cfg, &config_dir, &out_dir).map_err(classify)?
        }
    };

    let manifest = Manifest {
        command: cli.command.name(),
        config_path: config_path.display().to_string(),
        config_hash,
        seed: seed_used,
        version: env!("CARGO_PKG_VERSION"),
        outputs: outputs
            .files
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization") + "\n";
    std::fs::write(out_dir.join("manifest.json"), manifest_json)
        .context("writing manifest")
        .map_err(Either::Runtime)?;
    for f in &outputs.files {
        println!("{}", f.display());
    }
    println!("{}", out_dir.join("manifest.json").display());
    Ok(())
}

/// Missing/invalid input files are config errors; everything else is a
/// runtime failure.
fn classify(e: anyhow::Error) -> Either {
    let msg = format!("{e:#}");
    let config_like = e.root_cause().downcast_ref::<std::io::Error>().is_some()
        || msg.contains("loading params")
        || msg.contains("unknown field")
        || msg.contains("missing field");
    if config_like {
        Either::Config(ConfigError(e))
    } else {
        Either::Runtime(e)
    }
}
