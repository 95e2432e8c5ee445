//! Scatter export: the raw first parity value against the effective phase-1
//! noise, per message bit and position. The standard plot for reading off
//! the gated-noise shape and the knee location.

use serde::Serialize;

use crate::channel::{sample_bits, sample_realization, ChannelConfig};
use crate::codec::raw_encode;
use crate::error::{Error, Result};
use crate::params::ParamSet;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScatterRow {
    /// Effective phase-1 noise `n_i + n~_i` the encoder observed.
    pub n_eff: f64,
    /// Raw (pre power-allocation) first parity value at that position.
    pub parity: f64,
    pub bit: u8,
    /// 1-based message position.
    pub position: usize,
}

/// Sample `samples_per_position` fresh blocks and emit one row per message
/// position per block: the default 50 samples over K = 50 give 2500 points.
pub fn scatter_export(
    params: &ParamSet,
    config: &ChannelConfig,
    samples_per_position: usize,
    seed: u64,
) -> Result<Vec<ScatterRow>> {
    if samples_per_position < 1 {
        return Err(Error::InvalidConfig("samples_per_position must be at least 1".into()));
    }
    params.validate()?;
    let k = params.block.k;
    let p = params.block.padded_len();
    let mut rows = Vec::with_capacity(samples_per_position * k);
    for b in 0..samples_per_position as u64 {
        let bits = sample_bits(k, seed, b);
        let real = sample_realization(config, p, seed, b);
        let raw = raw_encode(&bits, &real, params)?;
        for i in 0..k {
            rows.push(ScatterRow {
                n_eff: raw.nu1[i],
                parity: raw.parities[i][0],
                bit: bits[i],
                position: i + 1,
            });
        }
    }
    Ok(rows)
}

/// CSV with a header row.
pub fn scatter_to_csv(rows: &[ScatterRow]) -> String {
    let mut s = String::from("n_eff,parity,bit,i\n");
    for r in rows {
        s.push_str(&format!("{:.17e},{:.17e},{},{}\n", r.n_eff, r.parity, r.bit, r.position));
    }
    s
}

/// The (x, y) pairs for a knee fit, filtered to one bit value.
pub fn scatter_points_for_bit(rows: &[ScatterRow], bit: u8) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.bit == bit).map(|r| (r.n_eff, r.parity)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}
