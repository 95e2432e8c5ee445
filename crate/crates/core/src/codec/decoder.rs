//! The interpretable decoder: five tanh units over a three-part linear
//! combination, merged through a learned sigmoid vote.
//!
//! For message position `i`, each unit sees the phase-1 reception `y_i`, a
//! combination of the current parity pair that isolates the transmitted
//! phase-1 noise (so it can be subtracted), and a combination of the next
//! position's parity pair that isolates the hidden-state correction sum.
//! Which combination plays which role depends on the variant's sign type.

use serde::{Deserialize, Serialize};

use crate::codec::variant::SignType;
use crate::codec::BlockConfig;
use crate::error::{Error, Result};

/// Number of decoding units.
pub const N_UNITS: usize = 5;

/// Learnable decoder coefficients: per-unit weights `d[j] = [d1, d2, d3, d4]`
/// (phase-1, current combiner, future combiner, bias) and vote weights `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderParams {
    pub d: [[f64; 4]; N_UNITS],
    pub l: [f64; N_UNITS],
}

/// Decoder outputs for one block.
#[derive(Clone, Debug)]
pub struct DecoderActivations {
    /// Unit outputs `O_{i,j}`, one row per message position.
    pub unit_outputs: Vec<[f64; N_UNITS]>,
    /// Soft bit estimates `D_i` in `[0, 1]`.
    pub soft: Vec<f64>,
    /// Hard decisions: 1 iff `D_i >= 0.5`.
    pub hard: Vec<u8>,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Decode a received codeword in episode layout
/// `[y_1..y_{K+1}, y_{1,1}, y_{1,2}, ..., y_{K+1,1}, y_{K+1,2}]`.
///
/// Only the `K` message positions are decoded; the padded position exists to
/// supply the future-parity window at `i = K`.
pub fn decode(
    y: &[f64],
    dec: &DecoderParams,
    block: &BlockConfig,
    sign_type: SignType,
) -> Result<DecoderActivations> {
    let p = block.padded_len();
    if y.len() != block.n() {
        return Err(Error::LengthMismatch { what: "received symbols", expected: block.n(), got: y.len() });
    }
    let k = block.k;
    let minus_current = sign_type == SignType::Type1;
    let mut unit_outputs = Vec::with_capacity(k);
    let mut soft = Vec::with_capacity(k);
    let mut hard = Vec::with_capacity(k);
    for i in 0..k {
        let y1 = y[i];
        let (c1, c2) = (y[p + 2 * i], y[p + 2 * i + 1]);
        let (f1, f2) = (y[p + 2 * (i + 1)], y[p + 2 * (i + 1) + 1]);
        let current = if minus_current { c1 - c2 } else { c1 + c2 };
        let future = if minus_current { f1 + f2 } else { f1 - f2 };
        let mut outs = [0.0; N_UNITS];
        let mut logit = 0.0;
        for j in 0..N_UNITS {
            let dj = &dec.d[j];
            let o = (dj[0] * y1 - dj[1] * current - dj[2] * future + dj[3]).tanh();
            outs[j] = o;
            logit += dec.l[j] * o;
        }
        let di = sigmoid(logit);
        unit_outputs.push(outs);
        soft.push(di);
        hard.push(u8::from(di >= 0.5));
    }
    Ok(DecoderActivations { unit_outputs, soft, hard })
}
