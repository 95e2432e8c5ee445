//! The full learnable parameter set and its persistence format.
//!
//! A parameter set aggregates every learnable scalar plus the variant
//! metadata, block geometry, frozen normalization constants, and a record of
//! how it was trained. The baseline 5-state variant has 43 learnable scalars
//! (6 encoder, 25 decoder, 12 power); varying knees add 2 and the 7-state
//! encoder adds 6.
//!
//! # File format
//!
//! A versioned JSON document with top-level keys `version`, `variant`,
//! `encoder`, `decoder`, `power`, `normalization`, `block`, `training_meta`.
//! Unknown keys are rejected. Every float is written in scientific notation
//! with 17 significant digits, so serialization round-trips bit-exactly and
//! re-serialization is byte-identical.
//!
//! # Learnable vector order
//!
//! Training flattens the set into a fixed, documented order:
//!
//! 1. `e1, e2, k1, k2, k3, k4`
//! 2. 7-state only: `e3, m1..m5`
//! 3. varying knee only: `lambda1, lambda2`
//! 4. decoder units row-major: `d[0][0..4], ..., d[4][0..4]`
//! 5. vote weights `l[0..5]`
//! 6. power weights `w[0..4], a1[0..4], a2[0..4]`

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::SnrDb;
use crate::codec::{
    BlockConfig, DecoderParams, EncoderParams, KneeMode, NormConsts, PowerAllocation,
    VariantSpec, N_CLASSES, N_UNITS,
};
use crate::error::{Error, Result};

/// Current params file schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance of a trained parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub snr_f_db: SnrDb,
    pub snr_fb_db: SnrDb,
    pub seed: u64,
    pub steps: usize,
    pub batch_blocks: usize,
}

impl TrainingMeta {
    pub fn untrained() -> Self {
        TrainingMeta {
            snr_f_db: SnrDb::Noiseless,
            snr_fb_db: SnrDb::Noiseless,
            seed: 0,
            steps: 0,
            batch_blocks: 0,
        }
    }
}

/// Everything needed to encode, decode, and reproduce a trained system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSet {
    pub variant: VariantSpec,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
    pub power: PowerAllocation,
    pub normalization: NormConsts,
    pub block: BlockConfig,
    pub training_meta: TrainingMeta,
}

impl ParamSet {
    /// A structurally valid set with neutral values: unit scales and weights,
    /// zero decoder. Starting point for training initialization and tests.
    pub fn initial(variant: VariantSpec, block: BlockConfig) -> Self {
        let seven = variant.is_seven_state();
        let varying = variant.knee_mode == KneeMode::Varying;
        ParamSet {
            variant,
            encoder: EncoderParams {
                e1: 1.0,
                e2: 1.0,
                k1: 1.0,
                k2: 1.0,
                k3: 1.0,
                k4: 1.0,
                e3: seven.then_some(1.0),
                m: seven.then_some([0.0; 5]),
                lambda1: varying.then_some(0.0),
                lambda2: varying.then_some(0.0),
            },
            decoder: DecoderParams { d: [[0.0; 4]; N_UNITS], l: [0.0; N_UNITS] },
            power: PowerAllocation::unit(),
            normalization: NormConsts::unit(),
            block,
            training_meta: TrainingMeta::untrained(),
        }
    }

    /// Number of learnable scalars for this variant: 43, 45, or 49.
    pub fn learnable_count(&self) -> usize {
        EncoderParams::learnable_count(&self.variant) + 4 * N_UNITS + N_UNITS + 3 * N_CLASSES
    }

    /// Flatten the learnables in the documented order.
    pub fn to_learnable_vec(&self) -> Vec<f64> {
        let e = &self.encoder;
        let mut v = vec![e.e1, e.e2, e.k1, e.k2, e.k3, e.k4];
        if self.variant.is_seven_state() {
            v.push(e.e3.unwrap_or(0.0));
            v.extend_from_slice(&e.m.unwrap_or([0.0; 5]));
        }
        if self.variant.knee_mode == KneeMode::Varying {
            v.push(e.lambda1.unwrap_or(0.0));
            v.push(e.lambda2.unwrap_or(0.0));
        }
        for row in &self.decoder.d {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.decoder.l);
        v.extend_from_slice(&self.power.w);
        v.extend_from_slice(&self.power.a1);
        v.extend_from_slice(&self.power.a2);
        v
    }

    /// Write back a learnable vector in the documented order.
    pub fn set_learnable_vec(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.learnable_count() {
            return Err(Error::ParamArity(format!(
                "expected {} learnables for this variant, got {}",
                self.learnable_count(),
                v.len()
            )));
        }
        let mut it = v.iter().copied();
        let mut next = || it.next().expect("length checked");
        self.encoder.e1 = next();
        self.encoder.e2 = next();
        self.encoder.k1 = next();
        self.encoder.k2 = next();
        self.encoder.k3 = next();
        self.encoder.k4 = next();
        if self.variant.is_seven_state() {
            self.encoder.e3 = Some(next());
            let mut m = [0.0; 5];
            for slot in &mut m {
                *slot = next();
            }
            self.encoder.m = Some(m);
        }
        if self.variant.knee_mode == KneeMode::Varying {
            self.encoder.lambda1 = Some(next());
            self.encoder.lambda2 = Some(next());
        }
        for row in &mut self.decoder.d {
            for slot in row {
                *slot = next();
            }
        }
        for slot in &mut self.decoder.l {
            *slot = next();
        }
        for slot in &mut self.power.w {
            *slot = next();
        }
        for slot in &mut self.power.a1 {
            *slot = next();
        }
        for slot in &mut self.power.a2 {
            *slot = next();
        }
        Ok(())
    }

    /// Structural validation: variant consistency, optional-group arity, and
    /// finiteness of every scalar.
    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        self.block.validate()?;
        let seven = self.variant.is_seven_state();
        if seven && (self.encoder.e3.is_none() || self.encoder.m.is_none()) {
            return Err(Error::ParamArity(
                "variant has 7 hidden states but encoder lacks e3/m coefficients".into(),
            ));
        }
        if !seven && (self.encoder.e3.is_some() || self.encoder.m.is_some()) {
            return Err(Error::ParamArity(
                "variant has 5 hidden states but encoder carries e3/m coefficients".into(),
            ));
        }
        let varying = self.variant.knee_mode == KneeMode::Varying;
        if varying && (self.encoder.lambda1.is_none() || self.encoder.lambda2.is_none()) {
            return Err(Error::ParamArity(
                "varying-knee variant requires lambda1 and lambda2".into(),
            ));
        }
        if !varying && (self.encoder.lambda1.is_some() || self.encoder.lambda2.is_some()) {
            return Err(Error::ParamArity(
                "fixed-knee variant must not carry lambda coefficients".into(),
            ));
        }
        for v in self.to_learnable_vec() {
            if !v.is_finite() {
                return Err(Error::ParamsFormat("non-finite parameter value".into()));
            }
        }
        self.normalization.validate()?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersistedParams {
    version: u32,
    variant: VariantSpec,
    encoder: EncoderParams,
    decoder: DecoderParams,
    power: PowerAllocation,
    normalization: NormConsts,
    block: BlockConfig,
    training_meta: TrainingMeta,
}

/// Pretty JSON formatter that writes every float as `{:.16e}`
/// (17 significant digits), enough to round-trip any f64 exactly.
struct SciFormatter {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_array(&mut self.inner, w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_array(&mut self.inner, w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_array_value(&mut self.inner, w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_array_value(&mut self.inner, w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_object(&mut self.inner, w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_object(&mut self.inner, w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_object_key(&mut self.inner, w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_object_key(&mut self.inner, w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::begin_object_value(&mut self.inner, w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        serde_json::ser::Formatter::end_object_value(&mut self.inner, w)
    }
}

/// Serialize a parameter set to its canonical file representation.
pub fn params_to_string(params: &ParamSet) -> Result<String> {
    params.validate()?;
    let doc = PersistedParams {
        version: SCHEMA_VERSION,
        variant: params.variant,
        encoder: params.encoder.clone(),
        decoder: params.decoder.clone(),
        power: params.power.clone(),
        normalization: params.normalization.clone(),
        block: params.block,
        training_meta: params.training_meta.clone(),
    };
    let mut out = Vec::new();
    let fmt = SciFormatter { inner: serde_json::ser::PrettyFormatter::new() };
    let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
    doc.serialize(&mut ser)
        .map_err(|e| Error::ParamsFormat(e.to_string()))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}

/// Parse a parameter set from its file representation, rejecting unknown
/// keys, unsupported schema versions, and arity violations.
pub fn params_from_str(s: &str) -> Result<ParamSet> {
    let probe: serde_json::Value =
        serde_json::from_str(s).map_err(|e| Error::ParamsFormat(e.to_string()))?;
    match probe.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v as u32 == SCHEMA_VERSION => {}
        Some(v) => return Err(Error::SchemaVersion(v as u32)),
        None => return Err(Error::ParamsFormat("missing top-level \"version\" key".into())),
    }
    let doc: PersistedParams =
        serde_json::from_str(s).map_err(|e| Error::ParamsFormat(e.to_string()))?;
    let params = ParamSet {
        variant: doc.variant,
        encoder: doc.encoder,
        decoder: doc.decoder,
        power: doc.power,
        normalization: doc.normalization,
        block: doc.block,
        training_meta: doc.training_meta,
    };
    params.validate()?;
    Ok(params)
}

/// Save to a file. `save` then `load` is the identity on every scalar.
pub fn save_params(params: &ParamSet, path: &Path) -> Result<()> {
    std::fs::write(path, params_to_string(params)?)?;
    Ok(())
}

/// Load from a file.
pub fn load_params(path: &Path) -> Result<ParamSet> {
    let s = std::fs::read_to_string(path)?;
    params_from_str(&s)
}

/// FNV-1a 64-bit hash of the canonical serialization, as stamped into result
/// CSVs so outputs can be traced back to the exact parameters.
pub fn params_hash(params: &ParamSet) -> Result<String> {
    Ok(fnv1a64(params_to_string(params)?.as_bytes()))
}

/// FNV-1a 64-bit hash, hex-encoded.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet {
        let mut p = ParamSet::initial(VariantSpec::baseline(), BlockConfig { k: 50 });
        let n = p.learnable_count();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.731).sin() * 1.5 + 0.01).collect();
        p.set_learnable_vec(&v).unwrap();
        p
    }

    #[test]
    fn learnable_counts_match_variants() {
        let five = ParamSet::initial(VariantSpec::baseline(), BlockConfig { k: 50 });
        assert_eq!(five.learnable_count(), 43);
        assert_eq!(five.to_learnable_vec().len(), 43);
        let seven = ParamSet::initial(VariantSpec::seven_state(), BlockConfig { k: 50 });
        assert_eq!(seven.learnable_count(), 49);
        assert_eq!(seven.to_learnable_vec().len(), 49);
        let knee = ParamSet::initial(VariantSpec::varying_knee(), BlockConfig { k: 50 });
        assert_eq!(knee.learnable_count(), 45);
        assert_eq!(knee.to_learnable_vec().len(), 45);
    }

    #[test]
    fn vec_round_trip() {
        let mut p = ParamSet::initial(VariantSpec::seven_state(), BlockConfig { k: 10 });
        let v: Vec<f64> = (0..p.learnable_count()).map(|i| i as f64 * 0.1 - 2.0).collect();
        p.set_learnable_vec(&v).unwrap();
        assert_eq!(p.to_learnable_vec(), v);
        assert!(p.set_learnable_vec(&v[..10]).is_err());
    }

    #[test]
    fn file_round_trip_is_bitwise_identity() {
        let p = sample();
        let s1 = params_to_string(&p).unwrap();
        let q = params_from_str(&s1).unwrap();
        assert_eq!(p, q);
        let s2 = params_to_string(&q).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn unknown_key_rejected_by_name() {
        let p = sample();
        let mut doc: serde_json::Value =
            serde_json::from_str(&params_to_string(&p).unwrap()).unwrap();
        doc.as_object_mut().unwrap().insert("mystery".into(), 1.into());
        let err = params_from_str(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");
    }

    #[test]
    fn missing_required_scalar_rejected() {
        let p = sample();
        let mut doc: serde_json::Value =
            serde_json::from_str(&params_to_string(&p).unwrap()).unwrap();
        doc["encoder"].as_object_mut().unwrap().remove("k4");
        let err = params_from_str(&doc.to_string()).unwrap_err();
        assert!(err.to_string().contains("k4"), "{err}");
    }

    #[test]
    fn arity_mismatch_rejected() {
        // 7 hidden states declared but only the 5-state scalars present.
        let p = sample();
        let mut doc: serde_json::Value =
            serde_json::from_str(&params_to_string(&p).unwrap()).unwrap();
        doc["variant"]["n_hidden"] = 7.into();
        let err = params_from_str(&doc.to_string()).unwrap_err();
        assert!(matches!(err, Error::ParamArity(_)), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        let p = sample();
        let mut doc: serde_json::Value =
            serde_json::from_str(&params_to_string(&p).unwrap()).unwrap();
        doc["version"] = 99.into();
        assert!(matches!(params_from_str(&doc.to_string()).unwrap_err(), Error::SchemaVersion(99)));
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let p = sample();
        let s = params_to_string(&p).unwrap();
        // Every float appears in scientific notation with 16 fractional
        // digits, e.g. 1.2345678901234567e0.
        assert!(s.contains("e0") || s.contains("e-") || s.contains("e1"));
        let reparsed = params_from_str(&s).unwrap();
        assert_eq!(p.to_learnable_vec(), reparsed.to_learnable_vec());
    }
}
