//! Sign-symmetric encoder/decoder variants.
//!
//! The base code family admits eight equivalent sign configurations: two
//! parity-sign types crossed with four choices of the resting values of the
//! recurrent states `h4` and `h5`. The resting contributions always cancel
//! in both parities, and the decoder's two parity combiners isolate the
//! nonrecurrent term and the hidden-state sum respectively.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parity sign type.
///
/// Type 1 negates the nonrecurrent term in the second parity, so the decoder
/// reads the phase-1 noise estimate from the difference of the current parity
/// pair and the correction sum from the future pair. Type 2 negates the
/// hidden-state sum instead, swapping the two combiner roles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignType {
    Type1,
    Type2,
}

/// Knee handling in the nonrecurrent term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KneeMode {
    /// Knee pinned at the origin (both shifts identically 0).
    Fixed,
    /// Learned knee shifts, one per bit value.
    Varying,
}

/// One member of the code family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub sign_type: SignType,
    /// Resting value of `h4`: +1 or -1.
    pub s4: i8,
    /// Resting value of `h5`: +1 or -1.
    pub s5: i8,
    /// Number of encoder hidden states: 5 or 7.
    pub n_hidden: u8,
    pub knee_mode: KneeMode,
}

impl VariantSpec {
    /// The baseline variant: Type 1, `h4` resting at +1, `h5` at -1,
    /// five hidden states, fixed knee.
    pub fn baseline() -> Self {
        VariantSpec {
            sign_type: SignType::Type1,
            s4: 1,
            s5: -1,
            n_hidden: 5,
            knee_mode: KneeMode::Fixed,
        }
    }

    pub fn seven_state() -> Self {
        VariantSpec { n_hidden: 7, ..Self::baseline() }
    }

    pub fn varying_knee() -> Self {
        VariantSpec { knee_mode: KneeMode::Varying, ..Self::baseline() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s4.abs() != 1 || self.s5.abs() != 1 {
            return Err(Error::InvalidConfig(format!(
                "s4/s5 must be +1 or -1, got s4={} s5={}",
                self.s4, self.s5
            )));
        }
        if self.n_hidden != 5 && self.n_hidden != 7 {
            return Err(Error::InvalidConfig(format!(
                "n_hidden must be 5 or 7, got {}",
                self.n_hidden
            )));
        }
        if self.n_hidden == 7 && self.knee_mode == KneeMode::Varying {
            return Err(Error::InvalidConfig(
                "the 7-state encoder is only defined with fixed knee points".into(),
            ));
        }
        Ok(())
    }

    pub fn is_seven_state(&self) -> bool {
        self.n_hidden == 7
    }

    /// All eight sign combinations, in a fixed enumeration order, for a given
    /// hidden-state count and knee mode.
    pub fn all_sign_combinations(n_hidden: u8, knee_mode: KneeMode) -> Vec<VariantSpec> {
        let mut out = Vec::with_capacity(8);
        for sign_type in [SignType::Type1, SignType::Type2] {
            for (s4, s5) in [(1, -1), (-1, -1), (1, 1), (-1, 1)] {
                out.push(VariantSpec { sign_type, s4, s5, n_hidden, knee_mode });
            }
        }
        out
    }
}

/// Resolved sign pattern driving parity formation, hidden updates, and the
/// decoder combiners.
///
/// In the normalized coordinates `g4 = s4*h4`, `g5 = s5*h5` (both resting at
/// +1), the hidden-state sum entering the first parity is always
/// `e2*(g5 - g4)`, which vanishes at rest for every sign choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignConfig {
    /// Resting value of `h4` as a float.
    pub s4: f64,
    /// Resting value of `h5` as a float.
    pub s5: f64,
    /// Sign of the nonrecurrent term in the second parity.
    pub c2_nonrec: f64,
    /// Sign of the hidden-state sum in the second parity.
    pub c2_hsum: f64,
    /// Sign with which the second parity-stream noise enters the hidden
    /// updates. Flipped for Type 2 so that the Type-1/Type-2 pair maps onto
    /// each other exactly under negation of that noise stream.
    pub nu2: f64,
    /// Decoder: current-parity combiner is `y_{i,1} - y_{i,2}` when true
    /// (Type 1), `y_{i,1} + y_{i,2}` when false (Type 2). The future-parity
    /// combiner uses the opposite operation.
    pub current_combiner_minus: bool,
}

/// Resolve a variant to its sign configuration.
pub fn variant_signs(spec: &VariantSpec) -> Result<SignConfig> {
    spec.validate()?;
    let type1 = spec.sign_type == SignType::Type1;
    Ok(SignConfig {
        s4: spec.s4 as f64,
        s5: spec.s5 as f64,
        c2_nonrec: if type1 { -1.0 } else { 1.0 },
        c2_hsum: if type1 { 1.0 } else { -1.0 },
        nu2: if type1 { 1.0 } else { -1.0 },
        current_combiner_minus: type1,
    })
}
