//! Simulation, training, and analysis toolkit for a lightweight interpretable
//! feedback code on the AWGN channel with passive (possibly noisy) feedback.
//!
//! The system transmits `K` message bits in two phases: uncoded BPSK first,
//! then two parity symbols per position computed causally from noise the
//! encoder observed through feedback. Encoder and decoder are small
//! closed-form expressions with a few dozen learnable scalars, trained end
//! to end by stochastic gradient descent on binary cross-entropy through an
//! exact hand-rolled reverse-mode differentiation of the unrolled system.
//!
//! Modules:
//! * [`channel`] — AWGN forward/feedback channels with counter-based,
//!   reproducible noise.
//! * [`codec`] — the interpretable encoder family (5/7 hidden states, knee
//!   variants, eight sign symmetries), power allocation, and the decoder.
//! * [`params`] — the aggregated parameter set and its JSON persistence.
//! * [`trainer`] — BCE training with exact gradients and Adam.
//! * [`ber`] — parallel Monte-Carlo bit-error-rate estimation.
//! * [`analysis`] — influence curves, outlier statistics, scatter export,
//!   and segmented least-squares fitting.

pub mod analysis;
pub mod ber;
pub mod channel;
pub mod codec;
pub mod error;
pub mod params;
pub mod rng;
pub mod trainer;

pub use channel::{ChannelConfig, ChannelRealization, SnrDb};
pub use codec::{BlockConfig, DecoderParams, EncoderParams, PowerAllocation, VariantSpec};
pub use error::{Error, Result};
pub use params::ParamSet;

/// Parallel map over a block-index range with order-preserving collection,
/// so reductions over the result are independent of worker count.
pub(crate) fn par_map_ordered<R, F>(range: std::ops::Range<u64>, f: F) -> Vec<R>
where
    F: Fn(u64) -> R + Sync + Send,
    R: Send,
{
    use rayon::prelude::*;
    range.into_par_iter().map(f).collect()
}
