//! Batch forward pass and exact reverse-mode gradient of the unrolled
//! encoder -> channel -> decoder -> BCE computation.
//!
//! Training normalizes the codeword by the current batch's pooled RMS over
//! all three streams (the batch analogue of the frozen calibration
//! constants), which couples every block in the batch through one
//! normalization scalar. The evaluation therefore runs in three phases:
//!
//! 1. encode every block and accumulate per-stream power sums (gives the
//!    pooled batch RMS and the per-stream degeneracy check),
//! 2. normalize, add channel noise, decode, accumulate the loss, and
//!    backpropagate each block down to the gradient w.r.t. its normalized
//!    symbols,
//! 3. with the batch-wide coupling sums known, finish the backward pass
//!    through the normalization, power weights, and encoder recurrence.
//!
//! Differentiation conventions: `tanh` and the sigmoid are differentiated
//! exactly; indicator factors are treated as locally constant, so a knee
//! shift contributes gradient only through the smooth factor it shifts.
//! Every reduction is an ordered sequential sum over block index, so results
//! are bit-identical for any worker count.

use crate::channel::ChannelRealization;
use crate::codec::{
    decode, position_class, raw_encode, variant_signs, KneeMode, RawEpisode, N_UNITS,
};
use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Gradient of the mean BCE w.r.t. the learnable vector, in the documented
/// parameter order.
pub type GradientVector = Vec<f64>;

/// Offsets of parameter groups within the flat vector.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Offsets {
    pub e3: usize,
    pub m: usize,
    pub lambda: usize,
    pub d: usize,
    pub l: usize,
    pub w: usize,
    pub a1: usize,
    pub a2: usize,
    pub len: usize,
    pub seven: bool,
    pub varying: bool,
}

impl Offsets {
    pub fn for_params(params: &ParamSet) -> Self {
        let seven = params.variant.is_seven_state();
        let varying = params.variant.knee_mode == KneeMode::Varying;
        let mut at = 6;
        let e3 = at;
        let m = at + 1;
        if seven {
            at += 6;
        }
        let lambda = at;
        if varying {
            at += 2;
        }
        let d = at;
        at += 4 * N_UNITS;
        let l = at;
        at += N_UNITS;
        let w = at;
        at += 4;
        let a1 = at;
        at += 4;
        let a2 = at;
        at += 4;
        Offsets { e3, m, lambda, d, l, w, a1, a2, len: at, seven, varying }
    }
}

const BCE_EPS: f64 = 1e-12;

/// Mean binary cross-entropy between soft estimates and true bits, with the
/// estimates clamped to `[1e-12, 1 - 1e-12]` before the logarithms.
pub fn bce(soft: &[f64], bits: &[u8]) -> Result<f64> {
    if soft.len() != bits.len() {
        return Err(Error::LengthMismatch { what: "soft estimates", expected: bits.len(), got: soft.len() });
    }
    if soft.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for (&d, &b) in soft.iter().zip(bits) {
        let d = d.clamp(BCE_EPS, 1.0 - BCE_EPS);
        sum -= if b == 1 { d.ln() } else { (1.0 - d).ln() };
    }
    Ok(sum / soft.len() as f64)
}

/// Everything retained per block between the phases.
struct BlockWork {
    raw: RawEpisode,
    /// Weighted pre-normalization symbols per stream.
    w1: Vec<f64>,
    w2: Vec<f64>,
    w3: Vec<f64>,
    /// Normalized symbols (filled in phase 2).
    x1: Vec<f64>,
    x2: Vec<f64>,
    x3: Vec<f64>,
    /// Gradient of the loss w.r.t. normalized symbols.
    g1: Vec<f64>,
    g2: Vec<f64>,
    g3: Vec<f64>,
    /// Decoder unit outputs and soft estimates.
    units: Vec<[f64; N_UNITS]>,
    soft: Vec<f64>,
}

pub(crate) struct BatchEval {
    pub loss: f64,
    pub grad: Option<GradientVector>,
}

/// Evaluate the batch loss and, optionally, its exact gradient.
pub(crate) fn batch_eval(
    params: &ParamSet,
    bits_batch: &[Vec<u8>],
    realizations: &[ChannelRealization],
    want_grad: bool,
) -> Result<BatchEval> {
    if bits_batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if bits_batch.len() != realizations.len() {
        return Err(Error::LengthMismatch {
            what: "realizations",
            expected: bits_batch.len(),
            got: realizations.len(),
        });
    }
    params.validate()?;
    let signs = variant_signs(&params.variant)?;
    let p = params.block.padded_len();
    let k = params.block.k;
    let nblocks = bits_batch.len();
    let off = Offsets::for_params(params);

    // Phase 1: encode, weight, accumulate stream power.
    let mut works: Vec<BlockWork> = {
        let results: Vec<Result<BlockWork>> = crate::par_map_ordered(0..nblocks as u64, |b| {
            let b = b as usize;
            let raw = raw_encode(&bits_batch[b], &realizations[b], params)?;
            let mut w1 = Vec::with_capacity(p);
            let mut w2 = Vec::with_capacity(p);
            let mut w3 = Vec::with_capacity(p);
            for i in 0..p {
                let cls = position_class(i, p);
                w1.push(params.power.w[cls] * raw.phase1_raw[i]);
                w2.push(params.power.a1[cls] * raw.parities[i][0]);
                w3.push(params.power.a2[cls] * raw.parities[i][1]);
            }
            Ok(BlockWork {
                raw,
                w1,
                w2,
                w3,
                x1: Vec::new(),
                x2: Vec::new(),
                x3: Vec::new(),
                g1: Vec::new(),
                g2: Vec::new(),
                g3: Vec::new(),
                units: Vec::new(),
                soft: Vec::new(),
            })
        });
        results.into_iter().collect::<Result<Vec<_>>>()?
    };

    let msym = (nblocks * p) as f64;
    let mut power_sums = [0.0f64; 3];
    for w in &works {
        power_sums[0] += w.w1.iter().map(|v| v * v).sum::<f64>();
        power_sums[1] += w.w2.iter().map(|v| v * v).sum::<f64>();
        power_sums[2] += w.w3.iter().map(|v| v * v).sum::<f64>();
    }
    // One pooled RMS divisor: the batch analogue of the frozen calibration.
    // A dead stream is a broken code even though the pooled RMS stays
    // positive, so degeneracy is still checked per stream.
    for (s, sum) in ["phase1", "parity1", "parity2"].iter().zip(power_sums) {
        if !(sum > 0.0) {
            return Err(Error::DegenerateStream(format!(
                "batch RMS of stream {s} is zero; encoder parameters are degenerate"
            )));
        }
    }
    let rho_pooled = ((power_sums[0] + power_sums[1] + power_sums[2]) / (3.0 * msym)).sqrt();
    let rho = [rho_pooled; 3];

    // Phase 2: normalize, receive, decode, loss, and backward to dL/dx.
    let total_bits = (nblocks * k) as f64;
    let minus_current = signs.current_combiner_minus;
    let phase2 = |work: &mut BlockWork, real: &ChannelRealization, bits: &[u8]| -> Result<f64> {
        work.x1 = work.w1.iter().map(|v| v / rho[0]).collect();
        work.x2 = work.w2.iter().map(|v| v / rho[1]).collect();
        work.x3 = work.w3.iter().map(|v| v / rho[2]).collect();
        let mut y = Vec::with_capacity(3 * p);
        for i in 0..p {
            y.push(work.x1[i] + real.phase1_noise[i]);
        }
        for i in 0..p {
            y.push(work.x2[i] + real.phase2_noise[i][0]);
            y.push(work.x3[i] + real.phase2_noise[i][1]);
        }
        let acts = decode(&y, &params.decoder, &params.block, params.variant.sign_type)?;

        let mut loss = 0.0;
        for i in 0..k {
            let d = acts.soft[i].clamp(BCE_EPS, 1.0 - BCE_EPS);
            loss -= if bits[i] == 1 { d.ln() } else { (1.0 - d).ln() };
        }

        if want_grad {
            work.g1 = vec![0.0; p];
            work.g2 = vec![0.0; p];
            work.g3 = vec![0.0; p];
            for i in 0..k {
                // d(BCE)/d(logit) = D - b for the unclamped sigmoid-BCE pair.
                let dlogit = (acts.soft[i] - bits[i] as f64) / total_bits;
                let mut gcur = 0.0;
                let mut gfut = 0.0;
                for (j, dj) in params.decoder.d.iter().enumerate() {
                    let o = acts.unit_outputs[i][j];
                    let dz = dlogit * params.decoder.l[j] * (1.0 - o * o);
                    gcur -= dz * dj[1];
                    gfut -= dz * dj[2];
                    work.g1[i] += dz * dj[0];
                }
                if minus_current {
                    work.g2[i] += gcur;
                    work.g3[i] -= gcur;
                    work.g2[i + 1] += gfut;
                    work.g3[i + 1] += gfut;
                } else {
                    work.g2[i] += gcur;
                    work.g3[i] += gcur;
                    work.g2[i + 1] += gfut;
                    work.g3[i + 1] -= gfut;
                }
            }
            work.units = acts.unit_outputs;
            work.soft = acts.soft;
        }
        Ok(loss)
    };

    let losses: Vec<Result<f64>> = {
        use rayon::prelude::*;
        works
            .par_iter_mut()
            .enumerate()
            .map(|(b, w)| phase2(w, &realizations[b], &bits_batch[b]))
            .collect()
    };
    let mut loss_sum = 0.0;
    for l in losses {
        loss_sum += l?;
    }
    let loss = loss_sum / total_bits;

    if !want_grad {
        return Ok(BatchEval { loss, grad: None });
    }

    // Batch-wide coupling sums for the RMS normalization backward:
    // dL/dW_j = (G_j - T * X_j / M) / rho with T = sum_i G_i X_i per stream.
    let mut t = [0.0f64; 3];
    for w in &works {
        t[0] += dot(&w.g1, &w.x1);
        t[1] += dot(&w.g2, &w.x2);
        t[2] += dot(&w.g3, &w.x3);
    }
    // Coupling coefficient: the three streams form one normalization pool.
    let tc = [(t[0] + t[1] + t[2]) / (3.0 * msym); 3];

    // Phase 3: per-block parameter gradients, then an ordered sum.
    let enc = &params.encoder;
    let dec = &params.decoder;
    let e3 = enc.e3.unwrap_or(0.0);
    let mm = enc.m.unwrap_or([0.0; 5]);
    let grads: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        works
            .par_iter()
            .enumerate()
            .map(|(b, work)| {
                let bits = &bits_batch[b];
                let raw = &work.raw;
                let mut g = vec![0.0f64; off.len];

                // Decoder parameter gradients (recompute the combiners).
                for i in 0..k {
                    let y1 = work.x1[i] + realizations[b].phase1_noise[i];
                    let c1 = work.x2[i] + realizations[b].phase2_noise[i][0];
                    let c2 = work.x3[i] + realizations[b].phase2_noise[i][1];
                    let f1 = work.x2[i + 1] + realizations[b].phase2_noise[i + 1][0];
                    let f2 = work.x3[i + 1] + realizations[b].phase2_noise[i + 1][1];
                    let current = if minus_current { c1 - c2 } else { c1 + c2 };
                    let future = if minus_current { f1 + f2 } else { f1 - f2 };
                    let dlogit = (work.soft[i] - bits[i] as f64) / total_bits;
                    for j in 0..N_UNITS {
                        let o = work.units[i][j];
                        g[off.l + j] += dlogit * o;
                        let dz = dlogit * dec.l[j] * (1.0 - o * o);
                        g[off.d + 4 * j] += dz * y1;
                        g[off.d + 4 * j + 1] -= dz * current;
                        g[off.d + 4 * j + 2] -= dz * future;
                        g[off.d + 4 * j + 3] += dz;
                    }
                }

                // Normalization backward, power weights, and encoder chain.
                let mut dg4_next = 0.0;
                let mut dg5_next = 0.0;
                let mut dh6_next = 0.0;
                let mut dh7_next = 0.0;
                for i in (0..p).rev() {
                    let cls = position_class(i, p);
                    let dw1 = (work.g1[i] - tc[0] * work.x1[i]) / rho[0];
                    let dw2 = (work.g2[i] - tc[1] * work.x2[i]) / rho[1];
                    let dw3 = (work.g3[i] - tc[2] * work.x3[i]) / rho[2];
                    g[off.w + cls] += dw1 * raw.phase1_raw[i];
                    g[off.a1 + cls] += dw2 * raw.parities[i][0];
                    g[off.a2 + cls] += dw3 * raw.parities[i][1];
                    let dc1 = dw2 * params.power.a1[cls];
                    let dc2 = dw3 * params.power.a2[cls];

                    // Parity composition.
                    let dsum_q = dc1 + signs.c2_nonrec * dc2;
                    g[0] += raw.q[i] * dsum_q; // e1
                    let dq = enc.e1 * dsum_q;
                    if off.varying && raw.q_active[i] {
                        if raw.padded_bits[i] == 0 {
                            g[off.lambda] += dq;
                        } else {
                            g[off.lambda + 1] -= dq;
                        }
                    }
                    let dhp = dc1 + signs.c2_hsum * dc2;
                    let h = &raw.hidden[i];
                    let hsum45 = signs.s5 * h.h5 - signs.s4 * h.h4;
                    g[1] += hsum45 * dhp; // e2
                    let dg4 = -enc.e2 * dhp + dg4_next;
                    let dg5 = enc.e2 * dhp + dg5_next;
                    let mut dh6 = 0.0;
                    let mut dh7 = 0.0;
                    if off.seven {
                        let hsum67 = h.h7 - h.h6;
                        g[off.e3] += hsum67 * dhp;
                        dh6 = -e3 * dhp + dh6_next;
                        dh7 = e3 * dhp + dh7_next;
                    }
                    dg4_next = 0.0;
                    dg5_next = 0.0;
                    dh6_next = 0.0;
                    dh7_next = 0.0;

                    if i == 0 {
                        // Resting start: everything upstream is constant.
                        continue;
                    }
                    let nu1p = raw.nu2[i - 1][0];
                    let nu2p = signs.nu2 * raw.nu2[i - 1][1];

                    if off.seven {
                        let hp = &raw.hidden[i - 1];
                        let g4_prev = signs.s4 * hp.h4;
                        let g5_prev = signs.s5 * hp.h5;
                        let dt6 = dh6 * (1.0 - h.h6 * h.h6);
                        g[off.m] += dt6 * nu1p;
                        g[off.m + 1] += dt6 * nu2p;
                        g[off.m + 2] += dt6 * g4_prev;
                        g[off.m + 3] += dt6 * hp.h7;
                        g[off.m + 4] += dt6;
                        dg4_next += dt6 * mm[2];
                        dh7_next += dt6 * mm[3];
                        let dt7 = dh7 * (1.0 - h.h7 * h.h7);
                        g[off.m] -= dt7 * nu1p;
                        g[off.m + 1] -= dt7 * nu2p;
                        g[off.m + 2] += dt7 * g5_prev;
                        g[off.m + 3] += dt7 * hp.h6;
                        g[off.m + 4] += dt7;
                        dg5_next += dt7 * mm[2];
                        dh6_next += dt7 * mm[3];
                    }

                    // The resting state of the pair is constant, so only the
                    // moving branch backpropagates.
                    let nu = raw.nu1[i - 1];
                    match raw.branch[i] {
                        0 => {
                            // g4 = tanh(-k1 nu + k2 nu1' - k3 nu2' + k4)
                            let dt = dg4 * (1.0 - raw.g45[i] * raw.g45[i]);
                            g[2] -= dt * nu;
                            g[3] += dt * nu1p;
                            g[4] -= dt * nu2p;
                            g[5] += dt;
                        }
                        1 => {
                            // g5 = tanh(k1 nu - k2 nu1' + k3 nu2' + k4)
                            let dt = dg5 * (1.0 - raw.g45[i] * raw.g45[i]);
                            g[2] += dt * nu;
                            g[3] -= dt * nu1p;
                            g[4] += dt * nu2p;
                            g[5] += dt;
                        }
                        _ => {}
                    }
                }
                g
            })
            .collect()
    };

    let mut grad = vec![0.0f64; off.len];
    for gb in grads {
        for (acc, v) in grad.iter_mut().zip(gb) {
            *acc += v;
        }
    }
    Ok(BatchEval { loss, grad: Some(grad) })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean BCE of the batch under batch-statistic normalization.
pub fn forward_loss(
    params: &ParamSet,
    bits_batch: &[Vec<u8>],
    realizations: &[ChannelRealization],
) -> Result<f64> {
    Ok(batch_eval(params, bits_batch, realizations, false)?.loss)
}

/// Exact reverse-mode gradient of [`forward_loss`] in the documented
/// parameter order.
pub fn gradient(
    params: &ParamSet,
    bits_batch: &[Vec<u8>],
    realizations: &[ChannelRealization],
) -> Result<GradientVector> {
    Ok(batch_eval(params, bits_batch, realizations, true)?.grad.expect("grad requested"))
}
