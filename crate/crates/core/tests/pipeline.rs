use std::path::PathBuf;

use isar_core::config::WrapMethod;
use isar_core::io;
use isar_core::pipeline::{default_preamble, estimate, run_e2e, simulate, sweep, sweep_csv, Metrics};
use isar_core::rng::trial_seed;
use isar_core::{IsarError, SimConfig};

/// 2 ms CPI, 258 frames: fast but still wraps.
fn short() -> SimConfig {
    SimConfig { cpi_s: 2e-3, seed: 3, ..SimConfig::default() }
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_metrics.json")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn golden_metrics() {
    let run = run_e2e(&short(), None).unwrap();
    let got = run.manifest.metrics;
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden_path(), io::to_json_pretty(&got).unwrap()).unwrap();
    }
    let want: Metrics = serde_json::from_slice(&std::fs::read(golden_path()).unwrap()).unwrap();
    assert_eq!(got.delay_set_f1, want.delay_set_f1);
    assert_eq!(got.image_peak_match_count, want.image_peak_match_count);
    assert!(close(got.doppler_rmse_hz, want.doppler_rmse_hz), "{got:?} vs {want:?}");
    assert!(close(got.v_hat_mps, want.v_hat_mps), "{got:?} vs {want:?}");
    assert!(close(got.v_err_pct, want.v_err_pct), "{got:?} vs {want:?}");
}

#[test]
fn noiseless_short_run_recovers_every_delay() {
    let cfg = SimConfig { noiseless: true, ..short() };
    let run = run_e2e(&cfg, None).unwrap();
    assert_eq!(run.manifest.metrics.delay_set_f1, 1.0);
    assert_eq!(run.estimates.delays.ells, run.simulation.truth.delay_set(0));
    assert_eq!(run.image.n_cr(), cfg.num_frames());
    assert!(run.image.flipped);
}

#[test]
fn rerun_is_identical_and_seed_matters() {
    let a = run_e2e(&short(), None).unwrap();
    let b = run_e2e(&short(), None).unwrap();
    assert_eq!(a.simulation.frames, b.simulation.frames);
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.image, b.image);
    let c = run_e2e(&SimConfig { seed: 4, ..short() }, None).unwrap();
    assert_ne!(a.simulation.frames, c.simulation.frames);
}

#[test]
fn estimates_survive_both_frame_formats() {
    let cfg = short();
    let pre = default_preamble();
    let sim = simulate(&cfg, &pre).unwrap();
    let direct = estimate(&cfg, &sim.frames, &pre).unwrap();

    let bin = io::decode_frames(&io::encode_frames(&sim.frames)).unwrap();
    assert_eq!(estimate(&cfg, &bin, &pre).unwrap(), direct);

    // shortest round-trip float formatting keeps every bit
    let csv = io::frames_from_csv(&io::frames_to_csv(&sim.frames), cfg.sample_noise_variance()).unwrap();
    assert_eq!(csv, sim.frames);
}

#[test]
fn artifacts_are_written_and_listed() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_e2e(&short(), Some(dir.path())).unwrap();
    for name in run.manifest.outputs.values() {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    let est: io::EstimatesFile =
        serde_json::from_slice(&std::fs::read(dir.path().join("estimates.json")).unwrap()).unwrap();
    assert_eq!(est.n_hat_p, est.delays.len());
    assert_eq!(est.doppler_corrected[0].len(), short().num_frames());
    let cfg = SimConfig::parse(&std::fs::read_to_string(dir.path().join("config.txt")).unwrap()).unwrap();
    assert_eq!(cfg, short());
}

#[test]
fn too_few_frames_is_a_config_error() {
    let base = SimConfig::default();
    // exactly i_gap frames
    let cpi = base.i_gap as f64 * base.frame_spacing as f64 / base.bandwidth_hz;
    let cfg = SimConfig { cpi_s: cpi, ..base };
    assert_eq!(cfg.num_frames(), cfg.i_gap);
    let err = run_e2e(&cfg, None).err().unwrap();
    assert!(matches!(err.root(), IsarError::Config(_)), "{err}");
}

#[test]
fn pair_corrector_is_biased_at_full_cpi() {
    // Over the full CPI the Doppler drifts by several cycles between frames
    // 0 and M-1, which the pairwise corrector cannot see.
    let base = SimConfig { noiseless: true, ..SimConfig::default() };
    let track = run_e2e(&base, None).unwrap();
    assert!(track.manifest.metrics.v_err_pct < 5.0);
    let pair = SimConfig { wrap_method: WrapMethod::Pair, ..base };
    match run_e2e(&pair, None) {
        Ok(r) => {
            let (p, t) = (&r.estimates.doppler, &track.estimates.doppler);
            // the pair counts fall short of the tracked ones
            let short_by: Vec<i64> = p.wraps.iter().zip(&t.wraps).map(|(a, b)| b.0 - a.0).collect();
            assert!(short_by.iter().any(|&d| d != 0), "{short_by:?}");
            assert!(r.manifest.metrics.v_err_pct > 10.0, "{:?}", r.manifest.metrics);
        }
        Err(e) => assert!(matches!(e.root(), IsarError::NegativeRadicand { .. }), "{e}"),
    }
}

#[test]
fn sweep_reuses_trial_seeds_across_values() {
    let cfg = SimConfig { cpi_s: 1e-3, ..SimConfig::default() };
    let values = ["-20".to_string(), "10".to_string()];
    let rows = sweep(&cfg, "tx_power_dbm", &values, 2).unwrap();
    assert_eq!(rows.len(), 4);
    for v in &values {
        let seeds: Vec<u64> = rows.iter().filter(|r| &r.value == v).map(|r| r.seed).collect();
        assert_eq!(seeds, vec![trial_seed(cfg.seed, 0), trial_seed(cfg.seed, 1)]);
    }
    let csv = sweep_csv("tx_power_dbm", &rows);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("tx_power_dbm,trial,seed,delay_set_f1,"));
    // more power never hurts delay recovery
    let f1 = |v: &str| -> f64 {
        rows.iter()
            .filter(|r| r.value == v)
            .map(|r| r.metrics.map_or(0.0, |m| m.delay_set_f1))
            .sum()
    };
    assert!(f1("10") >= f1("-20"));
}
