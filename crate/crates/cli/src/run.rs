//! Per-command execution. Every command reads a JSON config, produces files
//! under the run directory, and records a manifest describing exactly how to
//! reproduce the outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use echocode::analysis::{
    influence_length, influence_table_csv, knee_fit, outlier_stats, perturbation_curve,
    scatter_export, scatter_to_csv, segmented_least_squares, step_encoder, PerturbSpec,
    PerturbTarget, ScatterRow,
};
use echocode::ber::{estimate_ber, estimates_to_csv, sweep, StopRule};
use echocode::channel::ChannelConfig;
use echocode::codec::VariantSpec;
use echocode::params::{load_params, params_hash, save_params, ParamSet};
use echocode::trainer::{trace_to_csv, train, TrainConfig};

use crate::config::*;

/// A finished run: files written under the output directory.
pub struct RunOutputs {
    pub files: Vec<PathBuf>,
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    files.push(path);
    Ok(())
}

/// Resolve a params path relative to the config file location.
fn load_params_rel(config_dir: &Path, params: &Path) -> Result<ParamSet> {
    let path = if params.is_absolute() { params.to_path_buf() } else { config_dir.join(params) };
    load_params(&path).with_context(|| format!("loading params from {}", path.display()))
}

pub fn run_train(config: TrainConfig, out_dir: &Path) -> Result<RunOutputs> {
    let output = train(&config)?;
    let mut files = Vec::new();
    let params_path = out_dir.join("params.json");
    save_params(&output.params, &params_path)?;
    files.push(params_path);
    write(out_dir, "loss.csv", &trace_to_csv(&output.trace), &mut files)?;
    Ok(RunOutputs { files })
}

pub fn run_eval_ber(config: EvalBerConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutputs> {
    let params = load_params_rel(config_dir, &config.params)?;
    let channel = ChannelConfig::from_snr(config.snr_f_db, config.snr_fb_db);
    let rule = StopRule { min_errors: config.min_errors, max_bits: config.max_bits };
    let est = estimate_ber(&params, &channel, &rule, config.seed)?;
    let mut files = Vec::new();
    write(out_dir, "ber.csv", &estimates_to_csv(&[est], &params_hash(&params)?), &mut files)?;
    Ok(RunOutputs { files })
}

pub fn run_sweep(config: SweepConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutputs> {
    let params = load_params_rel(config_dir, &config.params)?;
    let rule = StopRule { min_errors: config.min_errors, max_bits: config.max_bits };
    let grid = sweep(&params, &config.snr_f_db, &config.snr_fb_db, &rule, config.seed)?;
    let mut files = Vec::new();
    write(out_dir, "sweep.csv", &estimates_to_csv(&grid, &params_hash(&params)?), &mut files)?;
    Ok(RunOutputs { files })
}

fn target_name(t: PerturbTarget) -> &'static str {
    match t {
        PerturbTarget::Bit => "bit",
        PerturbTarget::Phase1Noise => "phase1_noise",
        PerturbTarget::Phase2Noise1 => "phase2_noise_1",
        PerturbTarget::Phase2Noise2 => "phase2_noise_2",
    }
}

pub fn run_influence(
    config: InfluenceConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutputs> {
    let params = load_params_rel(config_dir, &config.params)?;
    let channel = ChannelConfig::from_snr(config.snr_f_db, config.snr_fb_db);
    let mut enc = step_encoder(&params)?;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for &target in &config.targets {
        let deltas: &[f64] =
            if target == PerturbTarget::Bit { &[1.0] } else { &config.deltas };
        for &delta in deltas {
            let spec = PerturbSpec {
                target,
                delta,
                position: config.position,
                samples: config.samples,
                delta_threshold: config.delta_threshold,
            };
            let curve =
                perturbation_curve(&mut enc, &spec, &params.block, &channel, config.seed)?;
            let len = influence_length(&curve, config.delta_threshold);
            if config.write_curves {
                let name = format!("curve_{}_{}.csv", target_name(target), delta);
                write(out_dir, &name, &curve.to_csv(), &mut files)?;
            }
            rows.push((spec, len));
        }
    }
    write(out_dir, "influence_lengths.csv", &influence_table_csv(&rows), &mut files)?;
    Ok(RunOutputs { files })
}

pub fn run_outliers(
    config: OutliersConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutputs> {
    let params = load_params_rel(config_dir, &config.params)?;
    let channel = ChannelConfig::from_snr(config.snr_f_db, config.snr_fb_db);
    let report =
        outlier_stats(&params, &channel, config.blocks, config.threshold, config.seed)?;
    let mut files = Vec::new();
    write(out_dir, "outlier_fractions.csv", &report.fractions_csv(), &mut files)?;
    write(out_dir, "outlier_histogram.csv", &report.histogram_csv(), &mut files)?;
    Ok(RunOutputs { files })
}

pub fn run_scatter(config: ScatterConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutputs> {
    let params = load_params_rel(config_dir, &config.params)?;
    let channel = ChannelConfig::from_snr(config.snr_f_db, config.snr_fb_db);
    let rows = scatter_export(&params, &channel, config.samples_per_position, config.seed)?;
    let mut files = Vec::new();
    write(out_dir, "scatter.csv", &scatter_to_csv(&rows), &mut files)?;
    Ok(RunOutputs { files })
}

/// Parse a scatter CSV back into rows; falls back to generic two-column x,y.
fn read_points(path: &Path, bit: Option<u8>) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty input CSV")?;
    let scatter = header.starts_with("n_eff,");
    let mut pts = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if scatter {
            if fields.len() != 4 {
                bail!("line {}: expected 4 scatter columns", lineno + 2);
            }
            let row = ScatterRow {
                n_eff: fields[0].parse()?,
                parity: fields[1].parse()?,
                bit: fields[2].parse()?,
                position: fields[3].parse()?,
            };
            if bit.is_none_or(|b| b == row.bit) {
                pts.push((row.n_eff, row.parity));
            }
        } else {
            if fields.len() < 2 {
                bail!("line {}: expected at least 2 columns", lineno + 2);
            }
            pts.push((fields[0].parse()?, fields[1].parse()?));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

pub fn run_pwl_fit(config: PwlFitConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutputs> {
    let input = if config.input.is_absolute() {
        config.input.clone()
    } else {
        config_dir.join(&config.input)
    };
    let pts = read_points(&input, config.bit)?;
    let mut files = Vec::new();
    match config.mode {
        FitMode::Segmented => {
            let fit = segmented_least_squares(&pts, config.penalty)?;
            write(out_dir, "pwl_segments.csv", &fit.to_csv(), &mut files)?;
        }
        FitMode::Knee => {
            let fit = knee_fit(&pts, config.fix_knee_at_zero)?;
            write(out_dir, "knee.csv", &fit.to_csv(), &mut files)?;
        }
    }
    Ok(RunOutputs { files })
}

pub fn run_calibrate(
    config: CalibrateConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutputs> {
    let mut params = load_params_rel(config_dir, &config.params)?;
    let snr_f = config.snr_f_db.unwrap_or(params.training_meta.snr_f_db);
    let snr_fb = config.snr_fb_db.unwrap_or(params.training_meta.snr_fb_db);
    let channel = ChannelConfig::from_snr(snr_f, snr_fb);
    params.normalization = echocode::codec::calibrate_normalization(
        &params,
        &channel,
        config.blocks,
        config.seed,
    )?;
    let mut files = Vec::new();
    let path = out_dir.join("params.json");
    save_params(&params, &path)?;
    files.push(path);
    Ok(RunOutputs { files })
}

pub fn run_variants(config: VariantsConfig, out_dir: &Path) -> Result<RunOutputs> {
    let mut files = Vec::new();
    let mut estimates = Vec::new();
    let mut table = String::from(
        "sign_type,s4,s5,bits,errors,ber,ci_low,ci_high,train_seed,params_file\n",
    );
    let channel = ChannelConfig::from_snr(config.train.snr_f_db, config.train.snr_fb_db);
    let rule = StopRule { min_errors: config.eval_min_errors, max_bits: config.eval_max_bits };
    for (idx, variant) in VariantSpec::all_sign_combinations(config.n_hidden, config.knee_mode)
        .into_iter()
        .enumerate()
    {
        let mut train_cfg = config.train.clone();
        train_cfg.variant = variant;
        // Per-variant seed so the eight runs show independent training noise.
        train_cfg.seed = echocode::rng::derive_seed(config.train.seed, idx as u64);
        let output = train(&train_cfg)?;
        let name = format!(
            "params_{}_s4{}_s5{}.json",
            match variant.sign_type {
                echocode::codec::SignType::Type1 => "type1",
                echocode::codec::SignType::Type2 => "type2",
            },
            if variant.s4 > 0 { "p" } else { "m" },
            if variant.s5 > 0 { "p" } else { "m" },
        );
        let path = out_dir.join(&name);
        save_params(&output.params, &path)?;
        files.push(path);
        let est = estimate_ber(&output.params, &channel, &rule, config.eval_seed)?;
        table.push_str(&format!(
            "{},{},{},{},{},{:.6e},{:.6e},{:.6e},{},{}\n",
            match variant.sign_type {
                echocode::codec::SignType::Type1 => "type1",
                echocode::codec::SignType::Type2 => "type2",
            },
            variant.s4,
            variant.s5,
            est.bits_tested,
            est.bit_errors,
            est.ber,
            est.ci_low,
            est.ci_high,
            train_cfg.seed,
            name,
        ));
        estimates.push(est);
    }
    write(out_dir, "variants.csv", &table, &mut files)?;
    Ok(RunOutputs { files })
}
