//! Interpretation instruments: influence curves and lengths, hidden-state
//! outlier statistics, scatter export, and piecewise-linear fitting.

pub mod scatter;
pub mod sls;

use serde::{Deserialize, Serialize};

pub use scatter::{scatter_export, scatter_points_for_bit, scatter_to_csv, ScatterRow};
pub use sls::{knee_fit, segmented_least_squares, KneeFit, PwlFit, Segment};

use crate::channel::{sample_bits, sample_realization, ChannelConfig};
use crate::codec::{raw_encode, BlockConfig, StepEncoder};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng;

/// Which encoder input a perturbation targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    /// Flip the message bit at the target position.
    Bit,
    /// Add delta to the effective phase-1 noise at the target position.
    Phase1Noise,
    /// Add delta to the first effective parity noise at the target position.
    Phase2Noise1,
    /// Add delta to the second effective parity noise.
    Phase2Noise2,
}

/// A perturbation experiment.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub target: PerturbTarget,
    /// Additive perturbation for noise targets; ignored for bit flips.
    pub delta: f64,
    /// Target position `t`, 1-based over the message bits.
    pub position: usize,
    /// Monte-Carlo sample count.
    pub samples: usize,
    /// Relative threshold for the influence length.
    pub delta_threshold: f64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        PerturbSpec {
            target: PerturbTarget::Bit,
            delta: 1.0,
            position: 5,
            samples: 10_000,
            delta_threshold: 0.05,
        }
    }
}

/// Expected L1 difference of the raw parity pair per position, for positions
/// `t..=K`. Entries before `t` are identically zero by causality and are not
/// stored.
#[derive(Clone, Debug)]
pub struct InfluenceCurve {
    /// 1-based target position `t`.
    pub position: usize,
    /// `values[j]` is the value at position `t + j`.
    pub values: Vec<f64>,
}

impl InfluenceCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,l1_diff\n");
        for (j, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{:.17e}\n", self.position + j, v));
        }
        s
    }
}

/// Monte-Carlo estimate of the influence curve of one perturbation, with
/// common random numbers across the perturbed/unperturbed pair.
///
/// The encoder is driven twice per sample over identical inputs except at
/// the target, so positions the perturbation cannot reach structurally
/// produce exactly zero.
pub fn perturbation_curve<E: StepEncoder>(
    encoder: &mut E,
    spec: &PerturbSpec,
    block: &BlockConfig,
    channel: &ChannelConfig,
    seed: u64,
) -> Result<InfluenceCurve> {
    block.validate()?;
    let k = block.k;
    let t = spec.position;
    if t < 1 || t > k {
        return Err(Error::InvalidConfig(format!(
            "perturbation position {t} outside message range 1..={k}"
        )));
    }
    if spec.samples < 1 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let p = block.padded_len();
    let mut acc = vec![0.0f64; k - t + 1];
    let mut base = Vec::with_capacity(p);
    for s in 0..spec.samples as u64 {
        let mut bits = sample_bits(k, seed, s);
        bits.push(0);
        let real = sample_realization(channel, p, seed, s);
        let mut nu1: Vec<f64> = (0..p).map(|i| real.eff_phase1(i)).collect();
        let mut nu2: Vec<[f64; 2]> = (0..p).map(|i| real.eff_phase2(i)).collect();

        base.clear();
        encoder.reset();
        for i in 0..p {
            let prev = if i == 0 { [0.0; 2] } else { nu2[i - 1] };
            base.push(encoder.step(bits[i], nu1[i], prev));
        }

        match spec.target {
            PerturbTarget::Bit => bits[t - 1] ^= 1,
            PerturbTarget::Phase1Noise => nu1[t - 1] += spec.delta,
            PerturbTarget::Phase2Noise1 => nu2[t - 1][0] += spec.delta,
            PerturbTarget::Phase2Noise2 => nu2[t - 1][1] += spec.delta,
        }

        encoder.reset();
        for i in 0..p {
            let prev = if i == 0 { [0.0; 2] } else { nu2[i - 1] };
            let pert = encoder.step(bits[i], nu1[i], prev);
            if i >= t - 1 && i < k {
                acc[i - (t - 1)] +=
                    (pert[0] - base[i][0]).abs() + (pert[1] - base[i][1]).abs();
            }
        }
    }
    for v in &mut acc {
        *v /= spec.samples as f64;
    }
    Ok(InfluenceCurve { position: t, values: acc })
}

/// Influence length: the number of positions whose deviation exceeds the
/// relative threshold, `sum_i I(L_i > delta * max_k L_k)` with a strict
/// inequality. An all-zero curve has length 0.
pub fn influence_length(curve: &InfluenceCurve, delta_threshold: f64) -> usize {
    let max = curve.values.iter().copied().fold(0.0f64, f64::max);
    curve.values.iter().filter(|&&v| v > delta_threshold * max).count()
}

/// Outlier fractions and value histograms per hidden state, conditioned on
/// the previous message bit.
#[derive(Clone, Debug, Serialize)]
pub struct OutlierReport {
    pub threshold: f64,
    pub states: Vec<StateOutliers>,
}

pub const HIST_BINS: usize = 40;

#[derive(Clone, Debug, Serialize)]
pub struct StateOutliers {
    pub name: String,
    pub resting: f64,
    /// Fraction of steps with `|h - resting| > threshold`, by previous bit.
    pub fraction_prev0: f64,
    pub fraction_prev1: f64,
    pub samples_prev0: u64,
    pub samples_prev1: u64,
    /// Histogram of values over [-1, 1] in `HIST_BINS` equal bins.
    pub histogram: Vec<u64>,
}

impl OutlierReport {
    pub fn fractions_csv(&self) -> String {
        let mut s = String::from("state,resting,prev_bit,outlier_fraction,samples\n");
        for st in &self.states {
            s.push_str(&format!(
                "{},{},0,{:.17e},{}\n",
                st.name, st.resting, st.fraction_prev0, st.samples_prev0
            ));
            s.push_str(&format!(
                "{},{},1,{:.17e},{}\n",
                st.name, st.resting, st.fraction_prev1, st.samples_prev1
            ));
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("state,bin_low,bin_high,count\n");
        for st in &self.states {
            for (b, count) in st.histogram.iter().enumerate() {
                let lo = -1.0 + 2.0 * b as f64 / HIST_BINS as f64;
                let hi = -1.0 + 2.0 * (b + 1) as f64 / HIST_BINS as f64;
                s.push_str(&format!("{},{lo:.4},{hi:.4},{count}\n", st.name));
            }
        }
        s
    }
}

/// Simulate trajectories and tabulate hidden-state deviations from rest.
///
/// Steps after the first are attributed to the previous message bit, which
/// selects the moving state; the resting start itself is skipped.
pub fn outlier_stats(
    params: &ParamSet,
    config: &ChannelConfig,
    blocks: u64,
    threshold: f64,
    seed: u64,
) -> Result<OutlierReport> {
    if blocks < 1 {
        return Err(Error::InvalidConfig("blocks must be at least 1".into()));
    }
    params.validate()?;
    let signs = crate::codec::variant_signs(&params.variant)?;
    let k = params.block.k;
    let p = params.block.padded_len();
    let seven = params.variant.is_seven_state();
    let n_states = if seven { 4 } else { 2 };
    let resting = [signs.s4, signs.s5, 1.0, 1.0];
    let names = ["h4", "h5", "h6", "h7"];

    // counts[state][prev_bit], histogram per state.
    let mut outliers = [[0u64; 2]; 4];
    let mut totals = [[0u64; 2]; 4];
    let mut hist = vec![[0u64; HIST_BINS]; n_states];
    for b in 0..blocks {
        let bits = sample_bits(k, seed, b);
        let real = sample_realization(config, p, seed, b);
        let raw = raw_encode(&bits, &real, params)?;
        for i in 1..p {
            let prev = raw.padded_bits[i - 1] as usize;
            let h = &raw.hidden[i];
            let values = [h.h4, h.h5, h.h6, h.h7];
            for s in 0..n_states {
                totals[s][prev] += 1;
                if (values[s] - resting[s]).abs() > threshold {
                    outliers[s][prev] += 1;
                }
                let bin = (((values[s] + 1.0) / 2.0 * HIST_BINS as f64) as usize)
                    .min(HIST_BINS - 1);
                hist[s][bin] += 1;
            }
        }
    }
    let states = (0..n_states)
        .map(|s| StateOutliers {
            name: names[s].to_string(),
            resting: resting[s],
            fraction_prev0: ratio(outliers[s][0], totals[s][0]),
            fraction_prev1: ratio(outliers[s][1], totals[s][1]),
            samples_prev0: totals[s][0],
            samples_prev1: totals[s][1],
            histogram: hist[s].to_vec(),
        })
        .collect();
    Ok(OutlierReport { threshold, states })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Curve CSV for several deltas side by side, plus measured lengths.
pub fn influence_table_csv(rows: &[(PerturbSpec, usize)]) -> String {
    let mut s = String::from("target,delta,t,samples,delta_threshold,influence_length\n");
    for (spec, len) in rows {
        let target = match spec.target {
            PerturbTarget::Bit => "bit",
            PerturbTarget::Phase1Noise => "phase1_noise",
            PerturbTarget::Phase2Noise1 => "phase2_noise_1",
            PerturbTarget::Phase2Noise2 => "phase2_noise_2",
        };
        s.push_str(&format!(
            "{target},{},{},{},{},{len}\n",
            spec.delta, spec.position, spec.samples, spec.delta_threshold
        ));
    }
    s
}

/// Convenience: build the interpretable step machine for a parameter set.
pub fn step_encoder(params: &ParamSet) -> Result<crate::codec::InterpretableEncoder> {
    crate::codec::InterpretableEncoder::new(params.encoder.clone(), &params.variant)
}

/// Seed helper shared by analysis CLI paths.
pub fn analysis_seed(seed: u64, tag: u64) -> u64 {
    rng::derive_seed(seed, tag)
}
