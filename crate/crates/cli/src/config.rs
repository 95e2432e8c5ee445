//! Config-file schemas, one per subcommand. All JSON, all rejecting unknown
//! keys so typos surface as errors instead of silently ignored settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use echocode::analysis::PerturbTarget;
use echocode::channel::SnrDb;
use echocode::codec::KneeMode;

fn default_seed() -> u64 {
    1
}

fn default_min_errors() -> u64 {
    100
}

fn default_max_bits() -> u64 {
    100_000_000
}

fn noiseless() -> SnrDb {
    SnrDb::Noiseless
}

fn snr0() -> SnrDb {
    SnrDb::Db(0.0)
}

/// `eval-ber`: one BER measurement of a stored parameter set.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBerConfig {
    /// Path to the params JSON, relative to the config file's directory.
    pub params: PathBuf,
    #[serde(default = "snr0")]
    pub snr_f_db: SnrDb,
    #[serde(default = "noiseless")]
    pub snr_fb_db: SnrDb,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// `sweep`: a grid of BER measurements.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub params: PathBuf,
    pub snr_f_db: Vec<SnrDb>,
    pub snr_fb_db: Vec<SnrDb>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub max_bits: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_deltas() -> Vec<f64> {
    vec![1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 5.0, -5.0, 10.0, -10.0, 100.0, -100.0, 200.0, -200.0]
}

fn default_targets() -> Vec<PerturbTarget> {
    vec![
        PerturbTarget::Bit,
        PerturbTarget::Phase1Noise,
        PerturbTarget::Phase2Noise1,
        PerturbTarget::Phase2Noise2,
    ]
}

fn default_position() -> usize {
    5
}

fn default_samples() -> usize {
    10_000
}

fn default_threshold() -> f64 {
    0.05
}

/// `influence`: perturbation curves and influence lengths.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceConfig {
    pub params: PathBuf,
    #[serde(default = "default_targets")]
    pub targets: Vec<PerturbTarget>,
    /// Deltas applied to noise targets; bit flips ignore this list.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_position")]
    pub position: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_threshold")]
    pub delta_threshold: f64,
    #[serde(default = "snr0")]
    pub snr_f_db: SnrDb,
    #[serde(default = "noiseless")]
    pub snr_fb_db: SnrDb,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Also write one curve CSV per (target, delta).
    #[serde(default)]
    pub write_curves: bool,
}

fn default_outlier_blocks() -> u64 {
    2000
}

fn default_outlier_threshold() -> f64 {
    0.1
}

/// `outliers`: hidden-state deviation statistics.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutliersConfig {
    pub params: PathBuf,
    #[serde(default = "default_outlier_blocks")]
    pub blocks: u64,
    #[serde(default = "default_outlier_threshold")]
    pub threshold: f64,
    #[serde(default = "snr0")]
    pub snr_f_db: SnrDb,
    #[serde(default = "noiseless")]
    pub snr_fb_db: SnrDb,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_samples_per_position() -> usize {
    50
}

/// `scatter`: parity-vs-noise sample export.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub params: PathBuf,
    #[serde(default = "default_samples_per_position")]
    pub samples_per_position: usize,
    #[serde(default = "snr0")]
    pub snr_f_db: SnrDb,
    #[serde(default = "noiseless")]
    pub snr_fb_db: SnrDb,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Fit mode for `pwl-fit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Segmented,
    Knee,
}

fn default_penalty() -> f64 {
    0.1
}

/// `pwl-fit`: piecewise-linear fit over a scatter CSV (or any x,y CSV).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PwlFitConfig {
    /// Input CSV: either a scatter export or a two-column x,y file with a
    /// header row.
    pub input: PathBuf,
    pub mode: FitMode,
    /// Per-segment penalty (segmented mode).
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    /// Pin the knee at the origin (knee mode).
    #[serde(default)]
    pub fix_knee_at_zero: bool,
    /// Keep only rows with this bit value (scatter inputs).
    #[serde(default)]
    pub bit: Option<u8>,
}

fn default_calibration_blocks() -> u64 {
    100_000
}

/// `calibrate`: refresh the frozen normalization constants of a params file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub params: PathBuf,
    #[serde(default = "default_calibration_blocks")]
    pub blocks: u64,
    /// Channel for the calibration run; defaults to the training channel
    /// recorded in the params file.
    #[serde(default)]
    pub snr_f_db: Option<SnrDb>,
    #[serde(default)]
    pub snr_fb_db: Option<SnrDb>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// Shared training schedule for `variants` (the variant field itself is
/// enumerated by the command).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantsConfig {
    /// Schedule applied to all eight sign combinations. The `variant` field
    /// inside is ignored; each run still gets its own derived seed.
    pub train: echocode::trainer::TrainConfig,
    #[serde(default = "default_hidden")]
    pub n_hidden: u8,
    #[serde(default = "default_knee_mode")]
    pub knee_mode: KneeMode,
    #[serde(default = "default_min_errors")]
    pub eval_min_errors: u64,
    #[serde(default = "default_max_bits")]
    pub eval_max_bits: u64,
    #[serde(default = "default_seed")]
    pub eval_seed: u64,
}

fn default_hidden() -> u8 {
    5
}

fn default_knee_mode() -> KneeMode {
    KneeMode::Fixed
}
