//! The two-phase feedback codec: interpretable encoder, power allocation,
//! and interpretable decoder.
//!
//! A block of `K` message bits is zero-padded to `K + 1` positions. Phase 1
//! transmits the padded bits uncoded under BPSK; phase 2 transmits two parity
//! symbols per position, computed causally from what the encoder has observed
//! through feedback. The codeword layout is
//! `[c_1, ..., c_{K+1}, c_{1,1}, c_{1,2}, ..., c_{K+1,1}, c_{K+1,2}]`,
//! so `N = 3 (K + 1)` channel uses and rate `K / N`.

pub mod decoder;
pub mod encoder;
pub mod power;
pub mod variant;

use serde::{Deserialize, Serialize};

pub use decoder::{decode, DecoderActivations, DecoderParams, N_UNITS};
pub use encoder::{
    bpsk, nonrecurrent_term, parity_pair, update_hidden, EncoderParams, EncoderState,
    HiddenState, InterpretableEncoder, StepEncoder,
};
pub use power::{
    apply_power_allocation, calibrate_normalization, position_class, NormConsts,
    PowerAllocation, N_CLASSES,
};
pub use variant::{variant_signs, KneeMode, SignConfig, SignType, VariantSpec};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Block geometry. `K` message bits, padded length `K + 1`, three channel
/// uses per padded position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockConfig {
    pub k: usize,
}

impl BlockConfig {
    pub fn padded_len(&self) -> usize {
        self.k + 1
    }

    pub fn n(&self) -> usize {
        3 * self.padded_len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("block length K must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pre-normalization encoder outputs plus the internal trajectory, exposed
/// for training (which differentiates through it) and analysis.
#[derive(Clone, Debug)]
pub struct RawEpisode {
    /// Message bits plus the trailing padded zero.
    pub padded_bits: Vec<u8>,
    /// Effective phase-1 noise per position (`n + n~`).
    pub nu1: Vec<f64>,
    /// Effective parity-noise pair per position.
    pub nu2: Vec<[f64; 2]>,
    /// Nonrecurrent term value per position.
    pub q: Vec<f64>,
    /// Indicator state of the nonrecurrent term per position.
    pub q_active: Vec<bool>,
    /// Hidden states per position, physical coordinates.
    pub hidden: Vec<HiddenState>,
    /// Which state moved at each position: 0 = h4 (previous bit 0),
    /// 1 = h5, 2 = resting start.
    pub branch: Vec<u8>,
    /// tanh value of the moving state in normalized coordinates (1.0 at the
    /// resting start).
    pub g45: Vec<f64>,
    /// Raw parity pairs.
    pub parities: Vec<[f64; 2]>,
    /// Raw phase-1 BPSK symbols.
    pub phase1_raw: Vec<f64>,
}

/// Run the encoder over one block, producing raw streams and the trajectory.
///
/// Feedback causality: the machine at position `i` consumes the parity noise
/// generated at position `i - 1`, and position 1 starts from resting hidden
/// values with zero phase-2 history.
pub fn raw_encode(
    bits: &[u8],
    realization: &ChannelRealization,
    params: &ParamSet,
) -> Result<RawEpisode> {
    let p = params.block.padded_len();
    if bits.len() != params.block.k {
        return Err(Error::LengthMismatch { what: "message bits", expected: params.block.k, got: bits.len() });
    }
    if realization.padded_len() != p {
        return Err(Error::LengthMismatch {
            what: "realization positions",
            expected: p,
            got: realization.padded_len(),
        });
    }
    let signs = variant_signs(&params.variant)?;
    let mut machine = InterpretableEncoder::new(params.encoder.clone(), &params.variant)?;

    let mut padded_bits = Vec::with_capacity(p);
    padded_bits.extend_from_slice(bits);
    padded_bits.push(0);

    let (l1, l2) = params.encoder.knees();
    let mut ep = RawEpisode {
        padded_bits,
        nu1: (0..p).map(|i| realization.eff_phase1(i)).collect(),
        nu2: (0..p).map(|i| realization.eff_phase2(i)).collect(),
        q: Vec::with_capacity(p),
        q_active: Vec::with_capacity(p),
        hidden: Vec::with_capacity(p),
        branch: Vec::with_capacity(p),
        g45: Vec::with_capacity(p),
        parities: Vec::with_capacity(p),
        phase1_raw: Vec::with_capacity(p),
    };

    for i in 0..p {
        let bit = ep.padded_bits[i];
        let prev_nu2 = if i == 0 { [0.0; 2] } else { ep.nu2[i - 1] };
        let pair = machine.step(bit, ep.nu1[i], prev_nu2);
        let h = *machine.hidden();

        let active = if bit == 0 { ep.nu1[i] + l1 >= 0.0 } else { ep.nu1[i] - l2 <= 0.0 };
        ep.q.push(nonrecurrent_term(bit, ep.nu1[i], l1, l2));
        ep.q_active.push(active);
        ep.hidden.push(h);
        if i == 0 {
            ep.branch.push(2);
            ep.g45.push(1.0);
        } else if ep.padded_bits[i - 1] == 0 {
            ep.branch.push(0);
            ep.g45.push(signs.s4 * h.h4);
        } else {
            ep.branch.push(1);
            ep.g45.push(signs.s5 * h.h5);
        }
        ep.parities.push(pair);
        ep.phase1_raw.push(bpsk(bit));
    }
    Ok(ep)
}

/// One fully simulated block: transmitted and received symbols plus the
/// encoder trajectory.
#[derive(Clone, Debug)]
pub struct Episode {
    pub padded_bits: Vec<u8>,
    /// Transmitted symbols, codeword layout, power-normalized.
    pub x: Vec<f64>,
    /// Received symbols, same layout.
    pub y: Vec<f64>,
    /// Hidden-state trajectory.
    pub h_traj: Vec<HiddenState>,
    /// Pre-normalization parity pairs.
    pub raw_parities: Vec<[f64; 2]>,
}

/// Encode one block and push it through the forward channel, using the
/// frozen normalization constants stored in the parameter set.
pub fn run_encoder(
    bits: &[u8],
    realization: &ChannelRealization,
    params: &ParamSet,
) -> Result<Episode> {
    let raw = raw_encode(bits, realization, params)?;
    let x = apply_power_allocation(&raw.phase1_raw, &raw.parities, &params.power, &params.normalization)?;
    let p = params.block.padded_len();
    let mut y = Vec::with_capacity(x.len());
    for i in 0..p {
        y.push(x[i] + realization.phase1_noise[i]);
    }
    for i in 0..p {
        y.push(x[p + 2 * i] + realization.phase2_noise[i][0]);
        y.push(x[p + 2 * i + 1] + realization.phase2_noise[i][1]);
    }
    Ok(Episode {
        padded_bits: raw.padded_bits,
        x,
        y,
        h_traj: raw.hidden,
        raw_parities: raw.parities,
    })
}

/// Decode a received episode with the parameter set's decoder.
pub fn decode_episode(episode: &Episode, params: &ParamSet) -> Result<DecoderActivations> {
    decode(&episode.y, &params.decoder, &params.block, params.variant.sign_type)
}
