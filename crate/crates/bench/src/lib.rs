//! Shared fixtures for the benchmark targets.

use echocode::codec::{BlockConfig, VariantSpec};
use echocode::params::ParamSet;

/// A structurally sensible hand-set parameter set (not trained; benchmarks
/// measure throughput, not error rate).
pub fn bench_params(k: usize) -> ParamSet {
    let mut p = ParamSet::initial(VariantSpec::baseline(), BlockConfig { k });
    p.encoder.e1 = 0.4;
    p.encoder.e2 = 1.2;
    p.encoder.k1 = 0.7;
    p.encoder.k2 = 0.6;
    p.encoder.k3 = 0.6;
    p.encoder.k4 = 2.2;
    p.decoder.d = [[2.0, 0.7, 0.3, 0.0]; 5];
    p.decoder.l = [1.0, -1.0, 1.0, -1.0, 1.0];
    p.normalization.parity1 = 0.5;
    p.normalization.parity2 = 0.5;
    p
}
