//! End-to-end training of the codec's learnable scalars by Adam on the mean
//! binary cross-entropy, with exact hand-rolled reverse-mode gradients.

pub mod adam;
pub mod grad;

use serde::{Deserialize, Serialize};

use crate::channel::{sample_bits, sample_realization, ChannelConfig, ChannelRealization, SnrDb};
use crate::codec::{calibrate_normalization, BlockConfig, VariantSpec};
use crate::error::{Error, Result};
use crate::params::{ParamSet, TrainingMeta};
use crate::rng::{self, Stream};

pub use adam::{adam_step, clip_grad_norm, AdamState};
pub use grad::{bce, forward_loss, gradient, GradientVector};

/// Training hyperparameters. Defaults train the baseline variant at 0 dB
/// forward SNR with noiseless feedback.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Message bits per block.
    pub k: usize,
    /// Blocks per gradient step.
    pub batch_blocks: usize,
    /// Number of Adam steps.
    pub steps: usize,
    /// Initial learning rate.
    pub learning_rate: f64,
    /// Multiplier applied at each decay point.
    pub lr_decay_factor: f64,
    /// Decay points as fractions of the step budget.
    pub lr_decay_at: Vec<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Global L2 gradient-norm bound; non-positive disables clipping.
    pub grad_clip_norm: f64,
    pub snr_f_db: SnrDb,
    pub snr_fb_db: SnrDb,
    pub seed: u64,
    pub variant: VariantSpec,
    /// Blocks for the final frozen-normalization calibration.
    pub calibration_blocks: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 50,
            batch_blocks: 1000,
            steps: 20_000,
            learning_rate: 1e-2,
            lr_decay_factor: 0.1,
            lr_decay_at: vec![0.6, 0.85],
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_clip_norm: 1.0,
            snr_f_db: SnrDb::Db(0.0),
            snr_fb_db: SnrDb::Noiseless,
            seed: 1,
            variant: VariantSpec::baseline(),
            calibration_blocks: 100_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_blocks < 1 {
            return Err(Error::InvalidConfig("batch_blocks must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        self.variant.validate()?;
        Ok(())
    }

    pub fn channel(&self) -> ChannelConfig {
        ChannelConfig::from_snr(self.snr_f_db, self.snr_fb_db)
    }

    /// Learning rate in effect at a step.
    pub fn lr_at(&self, step: usize) -> f64 {
        let mut lr = self.learning_rate;
        for f in &self.lr_decay_at {
            if (step as f64) >= f * self.steps as f64 {
                lr *= self.lr_decay_factor;
            }
        }
        lr
    }
}

/// One loss-trace row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

/// A finished training run.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ParamSet,
    pub trace: Vec<TracePoint>,
}

/// Loss trace as CSV with a header row.
pub fn trace_to_csv(trace: &[TracePoint]) -> String {
    let mut s = String::from("step,loss,lr\n");
    for p in trace {
        s.push_str(&format!("{},{:.17e},{:.17e}\n", p.step, p.loss, p.lr));
    }
    s
}

fn init_uniform(seed: u64, idx: u64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng::uniform_at(seed, 0, Stream::Init, idx)
}

/// Seeded parameter initialization.
///
/// Encoder couplings start as small symmetric draws; the hidden biases (`k4`
/// and, for 7 states, `m5`) start positive so the resting states saturate
/// toward their sign values from the first step. The extra-state scale `e3`
/// starts with a random sign but a magnitude bounded away from zero, because
/// it gates every gradient into the `m` couplings and would otherwise die at
/// the `e3 = 0` saddle before those couplings orient. Power weights start at
/// 1 and knee shifts at 0.
pub fn initial_params(variant: VariantSpec, k: usize, seed: u64) -> Result<ParamSet> {
    variant.validate()?;
    let mut params = ParamSet::initial(variant, BlockConfig { k });
    let n = params.learnable_count();
    let mut v = params.to_learnable_vec();
    let mut draw = 0u64;
    for (i, slot) in v.iter_mut().enumerate().take(n) {
        let name_zone = i;
        *slot = match name_zone {
            // e1, e2, k1..k3: symmetric small range.
            0..=4 => init_uniform(seed, draw, -0.5, 0.5),
            // k4: positive bias.
            5 => init_uniform(seed, draw, 0.5, 1.5),
            _ => 0.0,
        };
        draw += 1;
    }
    let off = grad::Offsets::for_params(&params);
    if off.seven {
        let mag = init_uniform(seed, draw, 0.25, 0.75);
        draw += 1;
        let sign = if rng::bit_at(seed, 0, Stream::Init, draw) == 1 { 1.0 } else { -1.0 };
        draw += 1;
        v[off.e3] = sign * mag;
        // The extra states divide the parity-noise sign quadrants with
        // h4/h5: those fire on opposite-sign pairs (k2, -k3), so h6/h7 must
        // start oriented toward same-sign pairs (m1, m2 aligned) or the
        // pathway is born redundant and gets pruned instead of trained.
        v[off.m] = init_uniform(seed, draw, 0.25, 0.75);
        draw += 1;
        v[off.m + 1] = v[off.m] * (1.0 + init_uniform(seed, draw, -0.25, 0.25));
        draw += 1;
        for j in 2..4 {
            v[off.m + j] = init_uniform(seed, draw, -0.5, 0.5);
            draw += 1;
        }
        // m5 is the h6/h7 resting bias, positive like k4.
        v[off.m + 4] = init_uniform(seed, draw, 0.5, 1.5);
        draw += 1;
    }
    if off.varying {
        v[off.lambda] = 0.0;
        v[off.lambda + 1] = 0.0;
    }
    for j in 0..(4 * crate::codec::N_UNITS + crate::codec::N_UNITS) {
        v[off.d + j] = init_uniform(seed, draw, -0.1, 0.1);
        draw += 1;
    }
    for j in 0..(3 * crate::codec::N_CLASSES) {
        v[off.w + j] = 1.0;
    }
    params.set_learnable_vec(&v)?;
    Ok(params)
}

/// Sample one training batch. Block indices advance with the step so every
/// step sees fresh noise, deterministically in the seed.
pub fn sample_batch(
    config: &TrainConfig,
    step: usize,
) -> (Vec<Vec<u8>>, Vec<ChannelRealization>) {
    let channel = config.channel();
    let bits_seed = rng::derive_seed(config.seed, 1);
    let noise_seed = rng::derive_seed(config.seed, 2);
    let base = (step * config.batch_blocks) as u64;
    let padded = config.k + 1;
    let out: Vec<(Vec<u8>, ChannelRealization)> =
        crate::par_map_ordered(base..base + config.batch_blocks as u64, |b| {
            (
                sample_bits(config.k, bits_seed, b),
                sample_realization(&channel, padded, noise_seed, b),
            )
        });
    out.into_iter().unzip()
}

/// Train a parameter set from scratch. Deterministic in the config seed:
/// identical configs produce byte-identical parameter files.
///
/// Training normalizes by batch statistics; the returned set carries frozen
/// normalization constants from a final calibration run, plus the training
/// provenance in `training_meta`.
pub fn train(config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let mut params = initial_params(config.variant, config.k, rng::derive_seed(config.seed, 0))?;
    let mut vec = params.to_learnable_vec();
    let mut adam = AdamState::new(vec.len());
    let mut trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let (bits, reals) = sample_batch(config, step);
        let eval = grad::batch_eval(&params, &bits, &reals, true)?;
        let mut g = eval.grad.expect("gradient requested");
        if !eval.loss.is_finite() {
            return Err(Error::Diverged { step, loss: eval.loss });
        }
        clip_grad_norm(&mut g, config.grad_clip_norm);
        let lr = config.lr_at(step);
        adam_step(
            &mut vec,
            &g,
            &mut adam,
            step + 1,
            lr,
            config.adam_beta1,
            config.adam_beta2,
            config.adam_epsilon,
        );
        params.set_learnable_vec(&vec)?;
        trace.push(TracePoint { step, loss: eval.loss, lr });
    }

    params.training_meta = TrainingMeta {
        snr_f_db: config.snr_f_db,
        snr_fb_db: config.snr_fb_db,
        seed: config.seed,
        steps: config.steps,
        batch_blocks: config.batch_blocks,
    };
    params.normalization = calibrate_normalization(
        &params,
        &config.channel(),
        config.calibration_blocks,
        rng::derive_seed(config.seed, 3),
    )?;
    Ok(TrainOutput { params, trace })
}
