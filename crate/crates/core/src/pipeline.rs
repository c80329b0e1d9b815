//! End-to-end orchestration, scoring and parameter sweeps.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::delay::{detect_delays, DelaySet, DetectParams};
use crate::doppler::{doppler_difference_and_propagate, estimate_velocity, DopplerMatrix};
use crate::error::{IsarError, Result};
use crate::frontend::{backscatter_truth, design_beamformers, synthesize_all, FrameSamples};
use crate::golay::{assemble_preamble, ieee80211ad_pair, Preamble};
use crate::imaging::{
    centred_column, count_peak_matches, cross_range_bins, cross_range_resolution,
    cross_range_signal, form_image, range_profile, rotational_velocity, IsarImage,
};
use crate::io;
use crate::lse::LseSolver;
use crate::rng::trial_seed;
use crate::scene::{draw_betas, truth_table, vehicle_for, SceneTruth};

pub fn default_preamble() -> Preamble {
    assemble_preamble(&ieee80211ad_pair()).expect("802.11ad pair has length 128")
}

pub struct Simulation {
    pub truth: SceneTruth,
    /// Backscatter coefficients without `sqrt(Es)`.
    pub h: Vec<Complex64>,
    pub frames: Vec<FrameSamples>,
}

pub fn simulate(cfg: &SimConfig, preamble: &Preamble) -> Result<Simulation> {
    cfg.validate()?;
    let run = || -> Result<Simulation> {
        let vehicle = vehicle_for(cfg)?;
        let beta = draw_betas(cfg.seed, vehicle.len());
        let truth = truth_table(cfg, &vehicle, &beta)?;
        let h = backscatter_truth(cfg, &truth, &design_beamformers(cfg));
        let frames = synthesize_all(cfg, &truth, &h, preamble)?;
        Ok(Simulation { truth, h, frames })
    };
    run().map_err(|e| e.in_stage("simulate"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub delays: DelaySet,
    /// Frame-0 coefficients (including `sqrt(Es)`).
    pub h_hat: Vec<Complex64>,
    pub doppler: DopplerMatrix,
    pub v_hat: f64,
    pub omega: f64,
}

pub fn estimate(cfg: &SimConfig, frames: &[FrameSamples], preamble: &Preamble) -> Result<Estimates> {
    let frame0 = frames
        .first()
        .ok_or_else(|| IsarError::InvalidArgument("no frames".into()).in_stage("detect"))?;
    let params = DetectParams::from_config(cfg, frame0.sigma_nc2);
    let delays = detect_delays(frame0, preamble.s512(), &params).map_err(|e| e.in_stage("detect"))?;
    let solver = LseSolver::new(&delays, preamble).map_err(|e| e.in_stage("lse"))?;
    let h_all = solver.solve_all(frames);
    let doppler = doppler_difference_and_propagate(&h_all, &delays, cfg).map_err(|e| e.in_stage("doppler"))?;
    let v_hat = estimate_velocity(&doppler, cfg).map_err(|e| e.in_stage("velocity"))?;
    let omega = rotational_velocity(v_hat, cfg);
    Ok(Estimates {
        delays,
        h_hat: h_all.into_iter().next().unwrap_or_default(),
        doppler,
        v_hat,
        omega,
    })
}

/// Unflipped ISAR image from the estimates.
pub fn image(cfg: &SimConfig, est: &Estimates) -> Result<IsarImage> {
    let run = || -> Result<IsarImage> {
        let profile = range_profile(&est.delays, &est.h_hat, cfg)?;
        let bins = cross_range_bins(&est.doppler, est.omega, cfg)?;
        let cr = cross_range_signal(&bins, cfg.num_frames());
        form_image(&profile, &est.delays, &est.h_hat, &cr, cfg)
    };
    run().map_err(|e| e.in_stage("image"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub delay_set_f1: f64,
    pub doppler_rmse_hz: f64,
    pub v_hat_mps: f64,
    pub v_err_pct: f64,
    pub image_peak_match_count: usize,
}

/// Set F1 of two delay sets.
pub fn set_f1(estimated: &[i64], truth: &[i64]) -> f64 {
    let tp = estimated.iter().filter(|e| truth.contains(e)).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / estimated.len() as f64;
    let recall = tp / truth.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Truth scatterer positions on the flipped image grid: the row of its
/// frame-0 delay and the column of its anchor-frame Doppler mapped with the
/// estimated rotational velocity.
pub fn truth_pixels(cfg: &SimConfig, truth: &SceneTruth, img: &IsarImage, omega: f64) -> Vec<(i64, i64)> {
    let m = cfg.num_frames();
    let scale = cfg.wavelength() / (2.0 * omega * cross_range_resolution(cfg));
    (0..truth.num_scatterers())
        .map(|p| {
            let row = truth.at(p, 0).ell - img.origin_ell;
            let b = truth.at(p, m - 1).nu * scale;
            let col = centred_column(b.round(), m) as i64;
            (row, m as i64 - 1 - col)
        })
        .collect()
}

pub fn score(cfg: &SimConfig, truth: &SceneTruth, est: &Estimates, img: &IsarImage) -> Metrics {
    let truth_ells = truth.delay_set(0);
    let mut sq = 0.0;
    let mut n = 0usize;
    for (k, &ell) in est.delays.ells.iter().enumerate() {
        if est.doppler.excluded[k] {
            continue;
        }
        for p in (0..truth.num_scatterers()).filter(|&p| truth.at(p, 0).ell == ell) {
            for m in 0..truth.num_frames() {
                let e = est.doppler.corrected[k][m] - truth.at(p, m).nu;
                sq += e * e;
                n += 1;
            }
        }
    }
    let flipped = if img.flipped { img.clone() } else { img.flip() };
    let targets = truth_pixels(cfg, truth, &flipped, est.omega);
    Metrics {
        delay_set_f1: set_f1(&est.delays.ells, &truth_ells),
        doppler_rmse_hz: if n > 0 { (sq / n as f64).sqrt() } else { f64::NAN },
        v_hat_mps: est.v_hat,
        v_err_pct: 100.0 * (est.v_hat - cfg.vx).abs() / cfg.vx,
        image_peak_match_count: count_peak_matches(&flipped, &targets),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub seed: u64,
    pub outputs: BTreeMap<String, String>,
    pub metrics: Metrics,
}

pub struct RunOutput {
    pub manifest: RunManifest,
    pub simulation: Simulation,
    pub estimates: Estimates,
    pub image: IsarImage,
}

pub fn estimates_file(est: &Estimates) -> io::EstimatesFile {
    io::EstimatesFile {
        delays: est.delays.ells.clone(),
        h_hat: est.h_hat.iter().map(|h| [h.re, h.im]).collect(),
        doppler_corrected: est.doppler.corrected.clone(),
        delta_med: est.doppler.delta_med,
        v_hat: est.v_hat,
        n_hat_p: est.delays.len(),
    }
}

/// Writes the image triple (PGM, CSV, axes) and returns the file names.
pub fn write_image(dir: &Path, img: &IsarImage) -> Result<Vec<(&'static str, String)>> {
    io::write_atomic(&dir.join("image.pgm"), &io::image_pgm(img))?;
    io::write_atomic(&dir.join("image.csv"), io::image_csv(img).as_bytes())?;
    io::write_atomic(&dir.join("axes.json"), &io::to_json_pretty(&io::axes(img))?)?;
    Ok(vec![
        ("image_pgm", "image.pgm".into()),
        ("image_csv", "image.csv".into()),
        ("axes", "axes.json".into()),
    ])
}

/// Full chain. With `out` set, writes the frames, estimates, flipped image
/// and `manifest.json` into that directory.
pub fn run_e2e(cfg: &SimConfig, out: Option<&Path>) -> Result<RunOutput> {
    let preamble = default_preamble();
    let simulation = simulate(cfg, &preamble)?;
    let estimates = estimate(cfg, &simulation.frames, &preamble)?;
    let img = image(cfg, &estimates)?.flip();
    let metrics = score(cfg, &simulation.truth, &estimates, &img);

    let mut outputs = BTreeMap::new();
    if let Some(dir) = out {
        let mut write = || -> Result<()> {
            std::fs::create_dir_all(dir)?;
            io::write_atomic(&dir.join("config.txt"), cfg.to_text().as_bytes())?;
            io::write_atomic(&dir.join("frames.bin"), &io::encode_frames(&simulation.frames))?;
            io::write_atomic(&dir.join("estimates.json"), &io::to_json_pretty(&estimates_file(&estimates))?)?;
            outputs.insert("config".into(), "config.txt".into());
            outputs.insert("frames".into(), "frames.bin".into());
            outputs.insert("estimates".into(), "estimates.json".into());
            for (k, v) in write_image(dir, &img)? {
                outputs.insert(k.into(), v);
            }
            Ok(())
        };
        write().map_err(|e| e.in_stage("write"))?;
    }
    let manifest = RunManifest {
        config: cfg.to_text(),
        seed: cfg.seed,
        outputs,
        metrics,
    };
    if let Some(dir) = out {
        io::write_atomic(&dir.join("manifest.json"), &io::to_json_pretty(&manifest)?)
            .map_err(|e| e.in_stage("write"))?;
    }
    Ok(RunOutput {
        manifest,
        simulation,
        estimates,
        image: img,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub trial: usize,
    pub seed: u64,
    /// Empty on success, otherwise the failure message.
    pub error: String,
    pub metrics: Option<Metrics>,
}

/// Runs `trials` seeded e2e trials per value of `param`. Trial `t` uses seed
/// `base XOR splitmix64(t)` for every value, so trends compare like with like.
pub fn sweep(cfg: &SimConfig, param: &str, values: &[String], trials: usize) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(IsarError::Config("sweep needs at least one value".into()));
    }
    if !SimConfig::KEYS.contains(&param) || param == "seed" {
        return Err(IsarError::Config(format!("cannot sweep {param:?}")));
    }
    if trials == 0 {
        return Err(IsarError::Config("sweep needs at least one trial".into()));
    }
    let mut jobs = Vec::new();
    for v in values {
        let mut c = cfg.clone();
        c.set(param, v)?;
        c.validate()?;
        for t in 0..trials {
            let mut ct = c.clone();
            ct.seed = trial_seed(cfg.seed, t);
            jobs.push((v.clone(), t, ct));
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(value, trial, c)| {
            let (error, metrics) = match run_e2e(&c, None) {
                Ok(r) => (String::new(), Some(r.manifest.metrics)),
                Err(e) => (e.to_string(), None),
            };
            SweepRow { value, trial, seed: c.seed, error, metrics }
        })
        .collect())
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    use std::fmt::Write as _;
    let mut s = format!(
        "{param},trial,seed,delay_set_f1,doppler_rmse_hz,v_hat_mps,v_err_pct,image_peak_match_count,error\n"
    );
    for r in rows {
        let _ = write!(s, "{},{},{},", r.value, r.trial, r.seed);
        match &r.metrics {
            Some(m) => {
                let _ = write!(
                    s,
                    "{},{},{},{},{},",
                    m.delay_set_f1, m.doppler_rmse_hz, m.v_hat_mps, m.v_err_pct, m.image_peak_match_count
                );
            }
            None => s.push_str(",,,,,"),
        }
        let _ = writeln!(s, "\"{}\"", r.error.replace('"', "'"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_arithmetic() {
        let truth: Vec<i64> = (0..22).collect();
        assert_eq!(set_f1(&truth, &truth), 1.0);
        let missed: Vec<i64> = (0..21).collect();
        let f1 = set_f1(&missed, &truth);
        assert!((f1 - 2.0 * (21.0 / 22.0) / (1.0 + 21.0 / 22.0)).abs() < 1e-12);
        assert!((f1 - 0.977).abs() < 1e-3);
        assert_eq!(set_f1(&[100], &truth), 0.0);
    }

    #[test]
    fn sweep_validates_inputs() {
        let cfg = SimConfig::default();
        assert!(sweep(&cfg, "tx_power_dbm", &[], 1).is_err());
        assert!(sweep(&cfg, "warp_factor", &["1".into()], 1).is_err());
        assert!(sweep(&cfg, "tx_power_dbm", &["loud".into()], 1).is_err());
    }
}
