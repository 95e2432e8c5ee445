//! Parallel Monte-Carlo bit-error-rate estimation with rare-event stopping
//! rules, Wilson-score confidence intervals, and SNR sweeps.
//!
//! Blocks are independent work items indexed by the counter-based generator,
//! so estimates are bit-identical for any worker count. Simulation proceeds
//! in chunks; the stopping rule is checked on merged counts after each chunk,
//! so a run may overshoot `min_errors` by part of a chunk (recorded in the
//! counts) but never exceeds `max_bits`.

use serde::Serialize;

use crate::channel::{sample_bits, sample_realization, ChannelConfig};
use crate::codec::{decode_episode, run_encoder};
use crate::error::{Error, Result};
use crate::params::ParamSet;

/// 95% two-sided z value.
const Z95: f64 = 1.959963984540054;

/// One BER measurement.
#[derive(Clone, Debug, Serialize)]
pub struct BerEstimate {
    pub bit_errors: u64,
    pub bits_tested: u64,
    /// Point estimate `bit_errors / bits_tested`.
    pub ber: f64,
    /// Wilson-score 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Channel this was measured on.
    pub config: ChannelConfig,
}

/// Wilson score interval for a binomial proportion at confidence `z`.
/// Behaves sensibly at low and zero counts: zero errors give a lower bound
/// of exactly 0 and an upper bound of about `z^2 / n`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // At the boundary counts the algebraic bound is exactly 0 (or 1); keep it
    // free of float residue so zero-error runs report a one-sided interval.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Stopping rule: finish when either bound is reached.
#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        // 100 errors give roughly +-20% relative accuracy; 1e8 bits bound
        // the runtime for very clean channels.
        StopRule { min_errors: 100, max_bits: 100_000_000 }
    }
}

const CHUNK_BLOCKS: u64 = 8192;

/// Estimate the BER of a trained system over fresh random blocks.
///
/// Errors are counted over the `K` message bits only; the padded bit is
/// excluded. Deterministic in `(params, channel, rule, seed)`.
pub fn estimate_ber(
    params: &ParamSet,
    channel: &ChannelConfig,
    rule: &StopRule,
    seed: u64,
) -> Result<BerEstimate> {
    params.validate()?;
    crate::channel::validate_config(channel)?;
    let k = params.block.k as u64;
    if rule.min_errors < 1 {
        return Err(Error::InvalidConfig("min_errors must be at least 1".into()));
    }
    if rule.max_bits < k {
        return Err(Error::InvalidConfig(format!(
            "max_bits must cover at least one block ({k} bits)"
        )));
    }
    let padded = params.block.padded_len();
    let mut errors = 0u64;
    let mut bits_tested = 0u64;
    let mut next_block = 0u64;
    while errors < rule.min_errors && bits_tested < rule.max_bits {
        let remaining_blocks = (rule.max_bits - bits_tested) / k;
        let chunk = CHUNK_BLOCKS.min(remaining_blocks.max(1));
        let partial: Vec<u32> = crate::par_map_ordered(next_block..next_block + chunk, |b| {
            let bits = sample_bits(k as usize, seed, b);
            let real = sample_realization(channel, padded, seed, b);
            let ep = run_encoder(&bits, &real, params).expect("encode");
            let acts = decode_episode(&ep, params).expect("decode");
            let mut e = 0u32;
            for (hat, bit) in acts.hard.iter().zip(&bits) {
                e += u32::from(hat != bit);
            }
            e
        });
        for e in partial {
            errors += e as u64;
        }
        bits_tested += chunk * k;
        next_block += chunk;
    }
    let ber = errors as f64 / bits_tested as f64;
    let (ci_low, ci_high) = wilson_interval(errors, bits_tested, Z95);
    Ok(BerEstimate {
        bit_errors: errors,
        bits_tested,
        ber,
        ci_low,
        ci_high,
        seed,
        config: *channel,
    })
}

/// One estimate per grid point of `snr_f x snr_fb`, row-major over the
/// forward list. Each point gets a seed derived from `(seed, point index)`.
pub fn sweep(
    params: &ParamSet,
    snr_f_list: &[crate::channel::SnrDb],
    snr_fb_list: &[crate::channel::SnrDb],
    rule: &StopRule,
    seed: u64,
) -> Result<Vec<BerEstimate>> {
    if snr_f_list.is_empty() || snr_fb_list.is_empty() {
        return Err(Error::InvalidConfig("sweep lists must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(snr_f_list.len() * snr_fb_list.len());
    for (i, &snr_f) in snr_f_list.iter().enumerate() {
        for (j, &snr_fb) in snr_fb_list.iter().enumerate() {
            let channel = ChannelConfig::from_snr(snr_f, snr_fb);
            let point_seed = crate::rng::derive_seed(seed, (i * snr_fb_list.len() + j) as u64);
            out.push(estimate_ber(params, &channel, rule, point_seed)?);
        }
    }
    Ok(out)
}

/// CSV table of estimates with a header row.
pub fn estimates_to_csv(estimates: &[BerEstimate], params_file_hash: &str) -> String {
    let mut s =
        String::from("snr_f_db,snr_fb_db,bits,errors,ber,ci_low,ci_high,seed,params_file_hash\n");
    for e in estimates {
        s.push_str(&format!(
            "{},{},{},{},{:.6e},{:.6e},{:.6e},{},{}\n",
            e.config.snr_f_db,
            e.config.snr_fb_db,
            e.bits_tested,
            e.bit_errors,
            e.ber,
            e.ci_low,
            e.ci_high,
            e.seed,
            params_file_hash
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SnrDb;
    use crate::codec::{BlockConfig, VariantSpec};

    /// A hand-built system that decodes from the sign of the phase-1
    /// reception alone: d = (c, 0, 0, 0) with large c. Its BER over an AWGN
    /// channel with unit symbols is the Gaussian tail probability Q(1/sigma).
    fn sign_decoder_params(k: usize) -> ParamSet {
        let mut p = ParamSet::initial(VariantSpec::baseline(), BlockConfig { k });
        p.encoder.e1 = 1.0;
        p.encoder.e2 = 1.0;
        p.decoder.d = [[50.0, 0.0, 0.0, 0.0]; 5];
        p.decoder.l = [1.0; 5];
        p
    }

    /// Q(1) by Simpson quadrature of the standard normal density over
    /// [1, 10]; independent of any library tail function.
    fn q_of_one() -> f64 {
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let (a, b, n) = (1.0f64, 10.0f64, 20_000usize);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn wilson_interval_basics() {
        let (lo, hi) = wilson_interval(0, 1_000_000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi < 4.0 / 1_000_000.0 && hi > 3.0 / 1_000_000.0, "hi {hi}");
        let (lo, hi) = wilson_interval(100, 1_000_000, Z95);
        assert!(lo < 1e-4 && 1e-4 < hi);
        assert!(lo <= 100.0 / 1e6 && 100.0 / 1e6 <= hi);
    }

    #[test]
    fn uncoded_bpsk_matches_gaussian_tail() {
        let params = sign_decoder_params(50);
        let channel = ChannelConfig {
            sigma_f: 1.0,
            sigma_fb: 0.0,
            snr_f_db: SnrDb::Db(0.0),
            snr_fb_db: SnrDb::Noiseless,
        };
        let rule = StopRule { min_errors: u64::MAX, max_bits: 1_000_000 };
        let est = estimate_ber(&params, &channel, &rule, 5150).unwrap();
        let q1 = q_of_one();
        assert!((q1 - 0.15865525393145707).abs() < 1e-9, "quadrature check {q1}");
        assert!((est.ber - q1).abs() < 0.002, "ber {} vs Q(1) {q1}", est.ber);
        assert_eq!(est.bits_tested, 1_000_000);
    }

    #[test]
    fn worker_count_invariance() {
        let params = sign_decoder_params(20);
        let channel = ChannelConfig {
            sigma_f: 1.0,
            sigma_fb: 0.0,
            snr_f_db: SnrDb::Db(0.0),
            snr_fb_db: SnrDb::Noiseless,
        };
        let rule = StopRule { min_errors: 500, max_bits: 10_000_000 };
        let a = estimate_ber(&params, &channel, &rule, 7).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_ber(&params, &channel, &rule, 7).unwrap());
        assert_eq!(a.bit_errors, b.bit_errors);
        assert_eq!(a.bits_tested, b.bits_tested);
        assert_eq!(a.ber, b.ber);
    }

    #[test]
    fn min_errors_stop_overshoots_at_most_one_chunk() {
        let params = sign_decoder_params(20);
        let channel = ChannelConfig {
            sigma_f: 1.0,
            sigma_fb: 0.0,
            snr_f_db: SnrDb::Db(0.0),
            snr_fb_db: SnrDb::Noiseless,
        };
        let rule = StopRule { min_errors: 100, max_bits: 1_000_000_000 };
        let est = estimate_ber(&params, &channel, &rule, 99).unwrap();
        assert!(est.bit_errors >= 100);
        assert!(est.bits_tested <= (CHUNK_BLOCKS + 1) * 20);
    }

    // Calibration of the interval itself: over 100 seeds, the 95% interval
    // must contain the true uncoded-BPSK error probability at least 93 times.
    #[test]
    fn interval_coverage_over_seeds() {
        let params = sign_decoder_params(50);
        let channel = ChannelConfig {
            sigma_f: 1.0,
            sigma_fb: 0.0,
            snr_f_db: SnrDb::Db(0.0),
            snr_fb_db: SnrDb::Noiseless,
        };
        let p_true = q_of_one();
        let rule = StopRule { min_errors: u64::MAX, max_bits: 50_000 };
        let mut hits = 0;
        for seed in 0..100 {
            let est = estimate_ber(&params, &channel, &rule, seed).unwrap();
            if est.ci_low <= p_true && p_true <= est.ci_high {
                hits += 1;
            }
        }
        assert!(hits >= 93, "CI coverage too low: {hits}/100");
    }

    #[test]
    fn single_point_sweep_equals_estimate() {
        let params = sign_decoder_params(20);
        let rule = StopRule { min_errors: u64::MAX, max_bits: 100_000 };
        let grid = sweep(&params, &[SnrDb::Db(0.0)], &[SnrDb::Noiseless], &rule, 31).unwrap();
        assert_eq!(grid.len(), 1);
        let channel = ChannelConfig::from_snr(SnrDb::Db(0.0), SnrDb::Noiseless);
        let point = estimate_ber(&params, &channel, &rule, crate::rng::derive_seed(31, 0)).unwrap();
        assert_eq!(grid[0].bit_errors, point.bit_errors);
        assert_eq!(grid[0].ber, point.ber);
    }

    #[test]
    fn csv_deterministic() {
        let params = sign_decoder_params(20);
        let rule = StopRule { min_errors: u64::MAX, max_bits: 50_000 };
        let a = sweep(&params, &[SnrDb::Db(0.0), SnrDb::Db(1.0)], &[SnrDb::Noiseless], &rule, 8)
            .unwrap();
        let b = sweep(&params, &[SnrDb::Db(0.0), SnrDb::Db(1.0)], &[SnrDb::Noiseless], &rule, 8)
            .unwrap();
        assert_eq!(estimates_to_csv(&a, "x"), estimates_to_csv(&b, "x"));
    }
}
