//! Dev-loop experiment: train a system and report loss, BER, and influence.
//! Run: cargo run --release -p echocode --example train_dev -- \
//!     [steps] [batch] [seed] [variant: base|seven|knee] [snr_fb: noiseless|dB]

use echocode::ber::{estimate_ber, StopRule};
use echocode::channel::{ChannelConfig, SnrDb};
use echocode::codec::VariantSpec;
use echocode::trainer::{train, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let batch: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let variant = match args.get(4).map(|s| s.as_str()) {
        Some("seven") => VariantSpec::seven_state(),
        Some("knee") => VariantSpec::varying_knee(),
        _ => VariantSpec::baseline(),
    };
    let snr_fb = match args.get(5).map(|s| s.as_str()) {
        None | Some("noiseless") => SnrDb::Noiseless,
        Some(v) => SnrDb::Db(v.parse().expect("snr_fb dB")),
    };
    let snr_f = SnrDb::Db(args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.0));

    let cfg = TrainConfig {
        steps,
        batch_blocks: batch,
        seed,
        variant,
        snr_f_db: snr_f,
        snr_fb_db: snr_fb,
        calibration_blocks: 50_000,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let out = train(&cfg).expect("train");
    let dt = t0.elapsed();
    println!("trained {} steps x {} blocks in {:.1?} ({:.1} ms/step)", steps, batch, dt, dt.as_millis() as f64 / steps as f64);

    for w in [0, steps / 4, steps / 2, 3 * steps / 4, steps.saturating_sub(200)] {
        let hi = (w + 200).min(out.trace.len());
        if w >= hi { continue; }
        let avg: f64 = out.trace[w..hi].iter().map(|t| t.loss).sum::<f64>() / (hi - w) as f64;
        println!("  loss[{w}..{hi}] avg = {avg:.6}");
    }
    let v = out.params.to_learnable_vec();
    println!("encoder: e1={:+.4} e2={:+.4} k1={:+.4} k2={:+.4} k3={:+.4} k4={:+.4}", v[0], v[1], v[2], v[3], v[4], v[5]);
    println!("encoder ext: e3={:?} m={:?} lambdas=({:?}, {:?})",
        out.params.encoder.e3, out.params.encoder.m, out.params.encoder.lambda1, out.params.encoder.lambda2);
    println!("power w={:?}", out.params.power.w);
    println!("      a1={:?}", out.params.power.a1);
    println!("      a2={:?}", out.params.power.a2);
    println!("norm: {:?}", out.params.normalization);
    println!("decoder d: {:?}", out.params.decoder.d);
    println!("decoder l: {:?}", out.params.decoder.l);

    let channel = ChannelConfig::from_snr(snr_f, snr_fb);
    let t1 = std::time::Instant::now();
    let rule = StopRule { min_errors: 400, max_bits: 40_000_000 };
    let est = estimate_ber(&out.params, &channel, &rule, 777).expect("ber");
    println!(
        "BER @ {snr_f} dB fb {snr_fb}: {:.3e}  ({} errors / {} bits)  CI [{:.3e}, {:.3e}]  in {:.1?}",
        est.ber, est.bit_errors, est.bits_tested, est.ci_low, est.ci_high, t1.elapsed()
    );

    use echocode::analysis::{influence_length, perturbation_curve, step_encoder, PerturbSpec, PerturbTarget};
    let mut enc = step_encoder(&out.params).expect("encoder");
    for target in [PerturbTarget::Bit, PerturbTarget::Phase1Noise, PerturbTarget::Phase2Noise1, PerturbTarget::Phase2Noise2] {
        let mut lens = Vec::new();
        let deltas: &[f64] = if target == PerturbTarget::Bit { &[1.0] } else { &[1.0, -1.0, 10.0, -10.0, 100.0, -100.0, 200.0, -200.0] };
        for &delta in deltas {
            let spec = PerturbSpec { target, delta, position: 5, samples: 10_000, delta_threshold: 0.05 };
            let curve = perturbation_curve(&mut enc, &spec, &out.params.block, &channel, 31).expect("curve");
            lens.push((delta, influence_length(&curve, 0.05)));
        }
        println!("influence {:?}: {:?}", target, lens);
    }
}
