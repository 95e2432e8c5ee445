//! Power allocation and normalization.
//!
//! Each of the three symbol streams (phase-1, parity 1, parity 2) carries a
//! learnable weight per position class, then is divided by a frozen
//! normalization constant so the average transmit power over the whole
//! codeword is 1. The position classes are {first, interior, penultimate,
//! last} over the padded block: boundary positions lack correction history
//! or future correction and may need distinct power. That gives 3 x 4 = 12
//! learnable weights.
//!
//! Calibration pools all three streams into a single RMS and stores that
//! value as each stream's divisor. Pooling keeps the power split between
//! phase-1 and parity streams learnable through the weight scales, which the
//! training demonstrably uses; per-stream RMS divisors would pin every
//! stream to average power 1 and cost roughly a 2.5x higher error floor.
//! Uniformly rescaling all twelve weights cancels in the pooled RMS, so only
//! relative weights carry meaning.
//!
//! Normalization constants are not learnable. During training the divisor is
//! the current batch's pooled RMS; for evaluation it is frozen by a
//! calibration run and stored with the parameters.

use serde::{Deserialize, Serialize};

use crate::channel::{sample_bits, sample_realization, ChannelConfig};
use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Position classes over the padded block.
pub const N_CLASSES: usize = 4;

/// Class of padded position `i` (0-based) in a block of `padded_len`
/// positions: 0 = first, 1 = interior, 2 = penultimate, 3 = last.
/// First wins over penultimate/last for very short blocks.
#[inline]
pub fn position_class(i: usize, padded_len: usize) -> usize {
    if i == 0 {
        0
    } else if i + 1 == padded_len {
        3
    } else if i + 2 == padded_len {
        2
    } else {
        1
    }
}

/// Learnable per-stream, per-class weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerAllocation {
    /// Phase-1 stream weights, indexed by position class.
    pub w: [f64; N_CLASSES],
    /// First parity stream weights.
    pub a1: [f64; N_CLASSES],
    /// Second parity stream weights.
    pub a2: [f64; N_CLASSES],
}

impl PowerAllocation {
    pub fn unit() -> Self {
        PowerAllocation { w: [1.0; 4], a1: [1.0; 4], a2: [1.0; 4] }
    }
}

/// Frozen per-stream normalization divisors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConsts {
    pub phase1: f64,
    pub parity1: f64,
    pub parity2: f64,
}

impl NormConsts {
    pub fn unit() -> Self {
        NormConsts { phase1: 1.0, parity1: 1.0, parity2: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("phase1", self.phase1), ("parity1", self.parity1), ("parity2", self.parity2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::DegenerateStream(format!(
                    "normalization constant {name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Weight and normalize the three raw streams into the transmitted codeword
/// layout `[x_1..x_{K+1}, x_{1,1}, x_{1,2}, ..., x_{K+1,1}, x_{K+1,2}]`.
pub fn apply_power_allocation(
    phase1_raw: &[f64],
    parity_raw: &[[f64; 2]],
    alloc: &PowerAllocation,
    norm: &NormConsts,
) -> Result<Vec<f64>> {
    norm.validate()?;
    let p = phase1_raw.len();
    if parity_raw.len() != p {
        return Err(Error::LengthMismatch { what: "parity positions", expected: p, got: parity_raw.len() });
    }
    let mut x = Vec::with_capacity(3 * p);
    for (i, &c) in phase1_raw.iter().enumerate() {
        x.push(alloc.w[position_class(i, p)] * c / norm.phase1);
    }
    for (i, pair) in parity_raw.iter().enumerate() {
        let cls = position_class(i, p);
        x.push(alloc.a1[cls] * pair[0] / norm.parity1);
        x.push(alloc.a2[cls] * pair[1] / norm.parity2);
    }
    Ok(x)
}

/// Pooled RMS of the weighted pre-normalization symbols over a calibration
/// run, stored as each stream's divisor. Frozen thereafter for evaluation.
/// A stream whose own RMS is zero is rejected as degenerate even though the
/// pooled RMS stays positive.
///
/// Deterministic given the seed; the run draws fresh random bits and channel
/// realizations because the parity statistics depend on both.
pub fn calibrate_normalization(
    params: &ParamSet,
    config: &ChannelConfig,
    blocks: u64,
    seed: u64,
) -> Result<NormConsts> {
    if blocks < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "calibration needs at least 1e4 blocks, got {blocks}"
        )));
    }
    let k = params.block.k;
    let p = params.block.padded_len();
    const CHUNK: u64 = 4096;
    let mut sums = [0.0f64; 3];
    let mut start = 0u64;
    while start < blocks {
        let end = (start + CHUNK).min(blocks);
        let partials: Vec<[f64; 3]> = crate::par_map_ordered(start..end, |b| {
            let bits = sample_bits(k, seed, b);
            let real = sample_realization(config, p, seed, b);
            let raw = crate::codec::raw_encode(&bits, &real, params).expect("calibration encode");
            let mut s = [0.0f64; 3];
            for i in 0..p {
                let cls = position_class(i, p);
                let w1 = params.power.w[cls] * raw.phase1_raw[i];
                let w2 = params.power.a1[cls] * raw.parities[i][0];
                let w3 = params.power.a2[cls] * raw.parities[i][1];
                s[0] += w1 * w1;
                s[1] += w2 * w2;
                s[2] += w3 * w3;
            }
            s
        });
        for part in partials {
            for (acc, v) in sums.iter_mut().zip(part) {
                *acc += v;
            }
        }
        start = end;
    }
    let m = (blocks * p as u64) as f64;
    for (name, sum) in [("phase1", sums[0]), ("parity1", sums[1]), ("parity2", sums[2])] {
        if !(sum > 0.0) {
            return Err(Error::DegenerateStream(format!(
                "calibration found zero power in stream {name}; check encoder parameters"
            )));
        }
    }
    let pooled = ((sums[0] + sums[1] + sums[2]) / (3.0 * m)).sqrt();
    let consts = NormConsts { phase1: pooled, parity1: pooled, parity2: pooled };
    consts.validate()?;
    Ok(consts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SnrDb;
    use crate::codec::{BlockConfig, VariantSpec};

    fn calib_params() -> ParamSet {
        let mut p = ParamSet::initial(VariantSpec::baseline(), BlockConfig { k: 10 });
        p.encoder.e1 = 0.5;
        p.encoder.e2 = 1.3;
        p.encoder.k1 = 0.8;
        p.encoder.k2 = 0.7;
        p.encoder.k3 = 0.7;
        p.encoder.k4 = 2.5;
        p
    }

    fn snr0() -> ChannelConfig {
        ChannelConfig::from_snr(SnrDb::Db(0.0), SnrDb::Noiseless)
    }

    #[test]
    fn calibration_is_deterministic() {
        let params = calib_params();
        let a = calibrate_normalization(&params, &snr0(), 10_000, 21).unwrap();
        let b = calibrate_normalization(&params, &snr0(), 10_000, 21).unwrap();
        assert_eq!(a, b);
        // Pooled divisor: all three streams share one constant.
        assert_eq!(a.phase1, a.parity1);
        assert_eq!(a.parity1, a.parity2);
    }

    #[test]
    fn uniform_weight_rescale_cancels_in_calibration() {
        let params = calib_params();
        let mut scaled = params.clone();
        for w in scaled
            .power
            .w
            .iter_mut()
            .chain(scaled.power.a1.iter_mut())
            .chain(scaled.power.a2.iter_mut())
        {
            *w *= 2.0;
        }
        let a = calibrate_normalization(&params, &snr0(), 10_000, 5).unwrap();
        let b = calibrate_normalization(&scaled, &snr0(), 10_000, 5).unwrap();
        // The doubled weights double the pooled RMS, so the normalized
        // transmit symbols are unchanged.
        assert!((b.phase1 / a.phase1 - 2.0).abs() < 1e-12);
        let bits = crate::channel::sample_bits(10, 3, 0);
        let real = crate::channel::sample_realization(&snr0(), 11, 3, 0);
        let mut pa = params.clone();
        pa.normalization = a;
        let mut pb = scaled.clone();
        pb.normalization = b;
        let xa = crate::codec::run_encoder(&bits, &real, &pa).unwrap().x;
        let xb = crate::codec::run_encoder(&bits, &real, &pb).unwrap().x;
        for (u, v) in xa.iter().zip(&xb) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_parity_stream_rejected() {
        let mut params = calib_params();
        params.encoder.e1 = 0.0;
        params.encoder.e2 = 0.0;
        let err = calibrate_normalization(&params, &snr0(), 10_000, 7).unwrap_err();
        assert!(matches!(err, Error::DegenerateStream(_)), "{err}");
    }

    #[test]
    fn too_few_calibration_blocks_rejected() {
        let params = calib_params();
        assert!(calibrate_normalization(&params, &snr0(), 9_999, 7).is_err());
    }

    // The power-constraint oracle: calibrate, then measure the empirical
    // average power over fresh blocks directly.
    #[test]
    fn average_power_within_one_percent() {
        let mut params = calib_params();
        params.normalization = calibrate_normalization(&params, &snr0(), 20_000, 11).unwrap();
        let p = params.block.padded_len();
        let mut sum = 0.0;
        let blocks = 20_000u64;
        for b in 0..blocks {
            let bits = crate::channel::sample_bits(10, 999, b);
            let real = crate::channel::sample_realization(&snr0(), p, 999, b);
            let ep = crate::codec::run_encoder(&bits, &real, &params).unwrap();
            sum += ep.x.iter().map(|v| v * v).sum::<f64>();
        }
        let avg = sum / (blocks * 3 * p as u64) as f64;
        assert!((0.99..=1.01).contains(&avg), "average power {avg}");
    }

    #[test]
    fn position_classes() {
        // K = 50: padded length 51.
        assert_eq!(position_class(0, 51), 0);
        assert_eq!(position_class(1, 51), 1);
        assert_eq!(position_class(48, 51), 1);
        assert_eq!(position_class(49, 51), 2);
        assert_eq!(position_class(50, 51), 3);
        // K = 1: padded length 2, first and last only.
        assert_eq!(position_class(0, 2), 0);
        assert_eq!(position_class(1, 2), 3);
    }

    #[test]
    fn unit_weights_identity() {
        let phase1 = [1.0, -1.0, 1.0];
        let parity = [[0.5, -0.2], [0.0, 0.0], [1.5, 2.5]];
        let x = apply_power_allocation(&phase1, &parity, &PowerAllocation::unit(), &NormConsts::unit())
            .unwrap();
        assert_eq!(x, vec![1.0, -1.0, 1.0, 0.5, -0.2, 0.0, 0.0, 1.5, 2.5]);
    }

    #[test]
    fn zero_norm_rejected() {
        let bad = NormConsts { phase1: 0.0, parity1: 1.0, parity2: 1.0 };
        assert!(apply_power_allocation(&[1.0], &[[1.0, 1.0]], &PowerAllocation::unit(), &bad).is_err());
    }

    #[test]
    fn layout_is_phase1_then_interleaved_pairs() {
        let phase1 = [1.0, -1.0];
        let parity = [[10.0, 20.0], [30.0, 40.0]];
        let x = apply_power_allocation(&phase1, &parity, &PowerAllocation::unit(), &NormConsts::unit())
            .unwrap();
        assert_eq!(x, vec![1.0, -1.0, 10.0, 20.0, 30.0, 40.0]);
    }
}
