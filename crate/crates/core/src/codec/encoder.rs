//! The interpretable recurrent encoder.
//!
//! Phase 1 sends the padded message bits uncoded (BPSK). Phase 2 sends two
//! parity symbols per position, each built from two pieces:
//!
//! * a *nonrecurrent* term: the effective phase-1 noise of the current
//!   position, gated by an indicator so that only noise pushing the received
//!   symbol toward the wrong decision is transmitted;
//! * a *recurrent* correction: hidden states `h4`/`h5` (and `h6`/`h7` in the
//!   7-state extension) that rest at saturated values which cancel in the
//!   parities, and deviate ("outliers") exactly when the previous position's
//!   noise was large enough to threaten a decoding error.
//!
//! All noise the encoder consumes is what it observes through feedback:
//! forward plus feedback noise, `n + n~`, obtained by subtracting its own
//! transmitted symbol from the fed-back channel output.

use serde::{Deserialize, Serialize};

use crate::codec::variant::{variant_signs, SignConfig, VariantSpec};
use crate::error::{Error, Result};

/// Learnable encoder coefficients. The optional groups must match the
/// variant: `e3`/`m` present exactly for 7 hidden states, `lambda*` present
/// exactly for varying knee points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderParams {
    /// Scale of the nonrecurrent (gated phase-1 noise) term.
    pub e1: f64,
    /// Scale of the `h4`/`h5` correction sum.
    pub e2: f64,
    /// Hidden-update coefficient on the previous phase-1 noise.
    pub k1: f64,
    /// Hidden-update coefficient on the previous first parity noise.
    pub k2: f64,
    /// Hidden-update coefficient on the previous second parity noise.
    pub k3: f64,
    /// Hidden-update bias; the resting saturation offset.
    pub k4: f64,
    /// Scale of the `h6`/`h7` correction sum (7-state only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e3: Option<f64>,
    /// `h6`/`h7` update coefficients (7-state only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<[f64; 5]>,
    /// Knee shift for bit 0 (varying knee only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    /// Knee shift for bit 1 (varying knee only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
}

impl EncoderParams {
    pub fn knees(&self) -> (f64, f64) {
        (self.lambda1.unwrap_or(0.0), self.lambda2.unwrap_or(0.0))
    }

    /// Number of learnable scalars for a given variant.
    pub fn learnable_count(variant: &VariantSpec) -> usize {
        let mut n = 6;
        if variant.n_hidden == 7 {
            n += 6;
        }
        if variant.knee_mode == crate::codec::variant::KneeMode::Varying {
            n += 2;
        }
        n
    }
}

/// BPSK map: `c = 2b - 1`.
#[inline]
pub fn bpsk(bit: u8) -> f64 {
    2.0 * bit as f64 - 1.0
}

/// The indicator-gated noise term with optional knee shifts.
///
/// With `u = n_eff + lambda1` for bit 0 and `u = n_eff - lambda2` for bit 1,
/// returns `u * I(-(2b-1) u)`: the shifted noise when it lies on the side
/// that threatens the decision, and 0 on the safe side. `I(0) = 1`.
#[inline]
pub fn nonrecurrent_term(bit: u8, n_eff: f64, lambda1: f64, lambda2: f64) -> f64 {
    if bit == 0 {
        let u = n_eff + lambda1;
        if u >= 0.0 {
            u
        } else {
            0.0
        }
    } else {
        let u = n_eff - lambda2;
        if u <= 0.0 {
            u
        } else {
            0.0
        }
    }
}

/// Hidden-state vector in physical coordinates. `h6`/`h7` are inert (held at
/// their resting value 1) for 5-state variants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HiddenState {
    pub h4: f64,
    pub h5: f64,
    pub h6: f64,
    pub h7: f64,
}

impl HiddenState {
    pub fn resting(signs: &SignConfig) -> Self {
        HiddenState { h4: signs.s4, h5: signs.s5, h6: 1.0, h7: 1.0 }
    }
}

/// Inputs the hidden update consumes: everything observed about the previous
/// position through feedback.
#[derive(Clone, Copy, Debug)]
pub struct EncoderState {
    pub hidden: HiddenState,
    /// Previous message bit `b_{i-1}`.
    pub prev_bit: u8,
    /// Previous effective phase-1 noise `n_{i-1} + n~_{i-1}`.
    pub prev_phase1_obs: f64,
    /// Previous effective parity noise pair.
    pub prev_phase2_obs: [f64; 2],
}

/// One hidden-state transition.
///
/// The bit selects which of `h4`/`h5` moves: the other rests at its sign
/// value. The moving state saturates toward its resting value unless the
/// observed noises push it away (an outlier). For 7 hidden states, `h6`/`h7`
/// track sign combinations of the parity noises and carry one extra step of
/// memory through their mutual coupling.
pub fn update_hidden(
    state: &EncoderState,
    params: &EncoderParams,
    variant: &VariantSpec,
) -> Result<HiddenState> {
    let signs = variant_signs(variant)?;
    Ok(update_hidden_with_signs(state, params, &signs, variant.is_seven_state()))
}

pub(crate) fn update_hidden_with_signs(
    state: &EncoderState,
    params: &EncoderParams,
    signs: &SignConfig,
    seven: bool,
) -> HiddenState {
    let nu = state.prev_phase1_obs;
    let nu1 = state.prev_phase2_obs[0];
    let nu2 = signs.nu2 * state.prev_phase2_obs[1];
    let (h4, h5) = if state.prev_bit == 0 {
        let t4 = -params.k1 * nu + params.k2 * nu1 - params.k3 * nu2 + params.k4;
        (signs.s4 * t4.tanh(), signs.s5)
    } else {
        let t5 = params.k1 * nu - params.k2 * nu1 + params.k3 * nu2 + params.k4;
        (signs.s4, signs.s5 * t5.tanh())
    };
    let (h6, h7) = if seven {
        let m = params.m.unwrap_or([0.0; 5]);
        let g4_prev = signs.s4 * state.hidden.h4;
        let g5_prev = signs.s5 * state.hidden.h5;
        let t6 = m[0] * nu1 + m[1] * nu2 + m[2] * g4_prev + m[3] * state.hidden.h7 + m[4];
        let t7 = -m[0] * nu1 - m[1] * nu2 + m[2] * g5_prev + m[3] * state.hidden.h6 + m[4];
        (t6.tanh(), t7.tanh())
    } else {
        (1.0, 1.0)
    };
    HiddenState { h4, h5, h6, h7 }
}

/// Raw (pre power-allocation) parity pair from the nonrecurrent term and the
/// hidden state.
pub fn parity_pair(
    nonrec: f64,
    h: &HiddenState,
    params: &EncoderParams,
    variant: &VariantSpec,
) -> Result<[f64; 2]> {
    let signs = variant_signs(variant)?;
    Ok(parity_pair_with_signs(nonrec, h, params, &signs, variant.is_seven_state()))
}

pub(crate) fn parity_pair_with_signs(
    nonrec: f64,
    h: &HiddenState,
    params: &EncoderParams,
    signs: &SignConfig,
    seven: bool,
) -> [f64; 2] {
    // In normalized coordinates the correction is e2*(g5 - g4), zero at rest.
    let hsum45 = signs.s5 * h.h5 - signs.s4 * h.h4;
    let hsum67 = if seven { h.h7 - h.h6 } else { 0.0 };
    let correction = params.e2 * hsum45 + params.e3.unwrap_or(0.0) * hsum67;
    let c1 = params.e1 * nonrec + correction;
    let c2 = signs.c2_nonrec * params.e1 * nonrec + signs.c2_hsum * correction;
    [c1, c2]
}

/// Per-step encoder interface: feed the step-`i` input (current bit, current
/// effective phase-1 noise, previous step's effective parity-noise pair) and
/// receive the raw parity pair for step `i`.
///
/// Any encoder with this shape can be probed by the analysis instruments.
pub trait StepEncoder {
    /// Start a fresh block: hidden state to resting values, no history.
    fn reset(&mut self);
    fn step(&mut self, bit: u8, phase1_noise: f64, prev_parity_noise: [f64; 2]) -> [f64; 2];
}

/// The interpretable encoder as a step machine.
#[derive(Clone, Debug)]
pub struct InterpretableEncoder {
    params: EncoderParams,
    signs: SignConfig,
    seven: bool,
    state: EncoderState,
    started: bool,
}

impl InterpretableEncoder {
    pub fn new(params: EncoderParams, variant: &VariantSpec) -> Result<Self> {
        let signs = variant_signs(variant)?;
        if variant.is_seven_state() && (params.e3.is_none() || params.m.is_none()) {
            return Err(Error::ParamArity(
                "7-state variant requires e3 and m coefficients".into(),
            ));
        }
        let state = EncoderState {
            hidden: HiddenState::resting(&signs),
            prev_bit: 0,
            prev_phase1_obs: 0.0,
            prev_phase2_obs: [0.0; 2],
        };
        Ok(InterpretableEncoder {
            params,
            signs,
            seven: variant.is_seven_state(),
            state,
            started: false,
        })
    }

    pub fn hidden(&self) -> &HiddenState {
        &self.state.hidden
    }
}

impl StepEncoder for InterpretableEncoder {
    fn reset(&mut self) {
        self.state.hidden = HiddenState::resting(&self.signs);
        self.state.prev_bit = 0;
        self.state.prev_phase1_obs = 0.0;
        self.state.prev_phase2_obs = [0.0; 2];
        self.started = false;
    }

    fn step(&mut self, bit: u8, phase1_noise: f64, prev_parity_noise: [f64; 2]) -> [f64; 2] {
        if self.started {
            self.state.prev_phase2_obs = prev_parity_noise;
            self.state.hidden =
                update_hidden_with_signs(&self.state, &self.params, &self.signs, self.seven);
        } else {
            // Step 1 starts from resting values with zero phase-2 history.
            self.started = true;
        }
        let (l1, l2) = self.params.knees();
        let q = nonrecurrent_term(bit, phase1_noise, l1, l2);
        let pair = parity_pair_with_signs(q, &self.state.hidden, &self.params, &self.signs, self.seven);
        self.state.prev_bit = bit;
        self.state.prev_phase1_obs = phase1_noise;
        pair
    }
}
