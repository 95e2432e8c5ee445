//! End-to-end CLI tests: run the binary against temp configs and check the
//! produced files, exit codes, and diagnostics.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_echocode"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("echocode-cli-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Tiny but complete training config: small enough for a test, large enough
/// to exercise calibration (which requires 1e4 blocks).
fn tiny_train_config() -> String {
    r#"{
        "k": 8,
        "batch_blocks": 24,
        "steps": 12,
        "snr_f_db": 0.0,
        "snr_fb_db": "noiseless",
        "seed": 99,
        "calibration_blocks": 10000
    }"#
    .to_string()
}

#[test]
fn train_writes_params_loss_and_manifest() {
    let dir = tmpdir("train");
    let cfg = write_config(&dir, "train.json", &tiny_train_config());
    let out = dir.join("out");
    let res = run(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("params.json").exists());
    assert!(out.join("loss.csv").exists());
    assert!(out.join("manifest.json").exists());

    let params = echocode::params::load_params(&out.join("params.json")).unwrap();
    assert_eq!(params.block.k, 8);
    assert_eq!(params.training_meta.seed, 99);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 99);
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|v| v == "params.json"));

    let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,loss,lr\n"));
    assert_eq!(loss.lines().count(), 13);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tmpdir("seed-override");
    let cfg = write_config(&dir, "train.json", &tiny_train_config());
    let out = dir.join("out");
    let res = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "123",
    ]);
    assert!(res.status.success());
    let params = echocode::params::load_params(&out.join("params.json")).unwrap();
    assert_eq!(params.training_meta.seed, 123);
}

#[test]
fn identical_seeds_reproduce_byte_identical_outputs() {
    let dir = tmpdir("repro");
    let cfg = write_config(&dir, "train.json", &tiny_train_config());
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    for (out, workers) in [(&out1, "1"), (&out2, "2")] {
        let res = run(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(res.status.success());
    }
    assert_eq!(
        fs::read(out1.join("params.json")).unwrap(),
        fs::read(out2.join("params.json")).unwrap()
    );
    assert_eq!(fs::read(out1.join("loss.csv")).unwrap(), fs::read(out2.join("loss.csv")).unwrap());
}

#[test]
fn missing_params_file_exits_2_naming_path() {
    let dir = tmpdir("missing-params");
    let cfg = write_config(
        &dir,
        "eval.json",
        r#"{"params": "does_not_exist.json", "max_bits": 4000}"#,
    );
    let res = run(&["eval-ber", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("does_not_exist.json"), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_exits_2_naming_key() {
    let dir = tmpdir("unknown-key");
    let cfg = write_config(&dir, "train.json", r#"{"k": 8, "mystery_knob": 3}"#);
    let res = run(&["train", "--config", cfg.to_str().unwrap(), "--out", dir.join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("mystery_knob"), "stderr: {stderr}");
}

#[test]
fn eval_scatter_and_pwl_fit_pipeline() {
    let dir = tmpdir("pipeline");
    // Train a tiny model first.
    let train_cfg = write_config(&dir, "train.json", &tiny_train_config());
    let train_out = dir.join("train");
    assert!(run(&[
        "train",
        "--config",
        train_cfg.to_str().unwrap(),
        "--out",
        train_out.to_str().unwrap()
    ])
    .status
    .success());
    let params_path = train_out.join("params.json");

    // BER at a noisy point, tiny bit budget.
    let eval_cfg = write_config(
        &dir,
        "eval.json",
        &format!(
            r#"{{"params": {:?}, "snr_f_db": 0.0, "min_errors": 5, "max_bits": 4000, "seed": 3}}"#,
            params_path.to_str().unwrap()
        ),
    );
    let eval_out = dir.join("eval");
    let res = run(&["eval-ber", "--config", eval_cfg.to_str().unwrap(), "--out", eval_out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let ber_csv = fs::read_to_string(eval_out.join("ber.csv")).unwrap();
    assert!(ber_csv.starts_with("snr_f_db,snr_fb_db,bits,errors,ber,ci_low,ci_high,seed,params_file_hash\n"));
    assert_eq!(ber_csv.lines().count(), 2);

    // Scatter export.
    let scatter_cfg = write_config(
        &dir,
        "scatter.json",
        &format!(
            r#"{{"params": {:?}, "samples_per_position": 30, "seed": 5}}"#,
            params_path.to_str().unwrap()
        ),
    );
    let scatter_out = dir.join("scatter");
    let res = run(&["scatter", "--config", scatter_cfg.to_str().unwrap(), "--out", scatter_out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let scatter_csv = scatter_out.join("scatter.csv");
    let text = fs::read_to_string(&scatter_csv).unwrap();
    assert!(text.starts_with("n_eff,parity,bit,i\n"));
    assert_eq!(text.lines().count(), 1 + 30 * 8);

    // Knee fit over the bit-0 rows of that scatter.
    let fit_cfg = write_config(
        &dir,
        "fit.json",
        &format!(
            r#"{{"input": {:?}, "mode": "knee", "bit": 0}}"#,
            scatter_csv.to_str().unwrap()
        ),
    );
    let fit_out = dir.join("fit");
    let res = run(&["pwl-fit", "--config", fit_cfg.to_str().unwrap(), "--out", fit_out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(fit_out.join("knee.csv").exists());
}

#[test]
fn influence_and_outliers_commands() {
    let dir = tmpdir("analysis");
    let train_cfg = write_config(&dir, "train.json", &tiny_train_config());
    let train_out = dir.join("train");
    assert!(run(&[
        "train",
        "--config",
        train_cfg.to_str().unwrap(),
        "--out",
        train_out.to_str().unwrap()
    ])
    .status
    .success());
    let params_path = train_out.join("params.json");

    let infl_cfg = write_config(
        &dir,
        "infl.json",
        &format!(
            r#"{{"params": {:?}, "deltas": [1.0, -1.0], "position": 3, "samples": 50, "write_curves": true}}"#,
            params_path.to_str().unwrap()
        ),
    );
    let infl_out = dir.join("infl");
    let res = run(&["influence", "--config", infl_cfg.to_str().unwrap(), "--out", infl_out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let table = fs::read_to_string(infl_out.join("influence_lengths.csv")).unwrap();
    assert!(table.starts_with("target,delta,t,samples,delta_threshold,influence_length\n"));
    // bit (1 row) + 3 noise targets x 2 deltas.
    assert_eq!(table.lines().count(), 1 + 1 + 6);
    assert!(infl_out.join("curve_bit_1.csv").exists());

    let out_cfg = write_config(
        &dir,
        "outliers.json",
        &format!(r#"{{"params": {:?}, "blocks": 50}}"#, params_path.to_str().unwrap()),
    );
    let outliers_out = dir.join("outliers");
    let res = run(&["outliers", "--config", out_cfg.to_str().unwrap(), "--out", outliers_out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(outliers_out.join("outlier_fractions.csv").exists());
    assert!(outliers_out.join("outlier_histogram.csv").exists());
}

#[test]
fn sweep_grid_rows() {
    let dir = tmpdir("sweep");
    let train_cfg = write_config(&dir, "train.json", &tiny_train_config());
    let train_out = dir.join("train");
    assert!(run(&[
        "train",
        "--config",
        train_cfg.to_str().unwrap(),
        "--out",
        train_out.to_str().unwrap()
    ])
    .status
    .success());
    let sweep_cfg = write_config(
        &dir,
        "sweep.json",
        &format!(
            r#"{{"params": {:?}, "snr_f_db": [0.0, 2.0], "snr_fb_db": ["noiseless", 10.0],
                "min_errors": 3, "max_bits": 2000, "seed": 6}}"#,
            train_out.join("params.json").to_str().unwrap()
        ),
    );
    let out = dir.join("out");
    let res = run(&["sweep", "--config", sweep_cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "header + 2x2 grid:\n{csv}");
    assert!(csv.lines().nth(2).unwrap().starts_with("0,10,"));
}

#[test]
fn variants_trains_all_eight() {
    let dir = tmpdir("variants");
    let cfg = write_config(
        &dir,
        "variants.json",
        r#"{
            "train": {"k": 4, "batch_blocks": 8, "steps": 2, "seed": 5,
                       "calibration_blocks": 10000},
            "eval_min_errors": 2,
            "eval_max_bits": 400,
            "eval_seed": 9
        }"#,
    );
    let out = dir.join("out");
    let res = run(&["variants", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let table = fs::read_to_string(out.join("variants.csv")).unwrap();
    assert_eq!(table.lines().count(), 9, "header + 8 variants:\n{table}");
    // One params file per sign combination.
    let count = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().starts_with("params_")
        })
        .count();
    assert_eq!(count, 8);
}

#[test]
fn calibrate_round_trip() {
    let dir = tmpdir("calibrate");
    let train_cfg = write_config(&dir, "train.json", &tiny_train_config());
    let train_out = dir.join("train");
    assert!(run(&[
        "train",
        "--config",
        train_cfg.to_str().unwrap(),
        "--out",
        train_out.to_str().unwrap()
    ])
    .status
    .success());
    let params_path = train_out.join("params.json");

    let cal_cfg = write_config(
        &dir,
        "cal.json",
        &format!(
            r#"{{"params": {:?}, "blocks": 10000, "seed": 77}}"#,
            params_path.to_str().unwrap()
        ),
    );
    let cal_out = dir.join("cal");
    let res = run(&["calibrate", "--config", cal_cfg.to_str().unwrap(), "--out", cal_out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let recal = echocode::params::load_params(&cal_out.join("params.json")).unwrap();
    let orig = echocode::params::load_params(&params_path).unwrap();
    assert_eq!(recal.encoder, orig.encoder);
    assert_eq!(recal.decoder, orig.decoder);
    // Different calibration seed, different (but close) constants.
    assert!(recal.normalization.parity1 > 0.0);
}
