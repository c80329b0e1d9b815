//! Vehicle geometry, kinematics and per-frame ground truth.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::SimConfig;
use crate::error::{IsarError, Result};
use crate::rng::{Stream, GAIN_STREAM};
use crate::SPEED_OF_LIGHT;

const DEFAULT_VEHICLE_CSV: &str = include_str!("../data/sedan_v1.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// Offset from the vehicle reference point, m.
    pub offset: [f64; 3],
    /// Linear RCS share, m^2.
    pub rcs_m2: f64,
}

#[derive(Deserialize)]
struct Row {
    x_m: f64,
    y_m: f64,
    z_m: f64,
    rcs_share: f64,
}

/// Parses the `x_m,y_m,z_m,rcs_share` vehicle format. `#` lines are comments.
pub fn parse_vehicle_csv(text: &str) -> Result<Vec<Scatterer>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| IsarError::Format(format!("vehicle row {}: {e}", i + 1)))?;
        if !(row.rcs_share > 0.0 && row.rcs_share.is_finite()) {
            return Err(IsarError::Format(format!(
                "vehicle row {}: rcs_share must be positive",
                i + 1
            )));
        }
        out.push(Scatterer {
            offset: [row.x_m, row.y_m, row.z_m],
            rcs_m2: row.rcs_share,
        });
    }
    if out.is_empty() {
        return Err(IsarError::Format("vehicle file has no scatterers".into()));
    }
    Ok(out)
}

pub fn load_vehicle_csv(path: &Path) -> Result<Vec<Scatterer>> {
    parse_vehicle_csv(&std::fs::read_to_string(path)?)
}

/// Built-in 22-point sedan profile, 100 m^2 in total.
pub fn default_vehicle() -> Vec<Scatterer> {
    parse_vehicle_csv(DEFAULT_VEHICLE_CSV).expect("bundled vehicle file is valid")
}

/// The configured vehicle with its shares rescaled to the configured total RCS.
pub fn vehicle_for(cfg: &SimConfig) -> Result<Vec<Scatterer>> {
    let mut v = match &cfg.vehicle_file {
        Some(path) => load_vehicle_csv(path)?,
        None => default_vehicle(),
    };
    let total: f64 = v.iter().map(|s| s.rcs_m2).sum();
    let want = 10f64.powf(cfg.rcs_dbsm / 10.0);
    for s in &mut v {
        s.rcs_m2 *= want / total;
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: [f64; 3],
    pub range: f64,
    /// Range rate, m/s. Negative while approaching.
    pub range_rate: f64,
    pub phi: f64,
    pub theta: f64,
}

pub fn kinematics(cfg: &SimConfig, scatterers: &[Scatterer], m: usize) -> Vec<Kinematics> {
    let t = cfg.frame_time(m);
    scatterers
        .iter()
        .map(|s| {
            let q = [
                cfg.x0 + s.offset[0] + cfg.vx * t,
                cfg.y0 + s.offset[1],
                cfg.z0 + s.offset[2],
            ];
            let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            Kinematics {
                position: q,
                range: r,
                range_rate: q[0] * cfg.vx / r,
                phi: q[0].atan2(q[1]),
                theta: (q[2] / r).asin(),
            }
        })
        .collect()
}

/// Doppler shift of a scatterer with the given range rate. Approaching
/// targets (shrinking range) have positive Doppler.
pub fn doppler_from_range_rate(range_rate: f64, wavelength: f64) -> f64 {
    -2.0 * range_rate / wavelength
}

/// Radar-equation gain `rcs * lambda^2 / ((4 pi)^3 r^(2 n))`.
pub fn large_scale_gain(cfg: &SimConfig, r: f64, rcs_m2: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(IsarError::InvalidArgument(format!("range must be positive, got {r}")));
    }
    let lambda = cfg.wavelength();
    Ok(rcs_m2 * lambda * lambda / ((4.0 * PI).powi(3) * r.powf(2.0 * cfg.path_loss_exp)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterTruth {
    pub r: f64,
    /// Round-trip delay measured from the start of the frame, s.
    pub tau: f64,
    /// Sampled delay `floor(tau / T_s)`.
    pub ell: i64,
    /// Fractional remainder, `0 <= tau_f < T_s`.
    pub tau_f: f64,
    pub nu: f64,
    pub phi: f64,
    pub theta: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    /// `frames[m][p]`.
    pub frames: Vec<Vec<ScatterTruth>>,
    /// Small-scale gain per scatterer, constant over the CPI.
    pub beta: Vec<Complex64>,
}

impl SceneTruth {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_scatterers(&self) -> usize {
        self.beta.len()
    }

    pub fn at(&self, p: usize, m: usize) -> &ScatterTruth {
        &self.frames[m][p]
    }

    /// Distinct sampled delays of frame `m`, ascending.
    pub fn delay_set(&self, m: usize) -> Vec<i64> {
        let mut ells: Vec<i64> = self.frames[m].iter().map(|t| t.ell).collect();
        ells.sort_unstable();
        ells.dedup();
        ells
    }
}

/// One `CN(0, 1)` draw per scatterer from the gain stream.
pub fn draw_betas(seed: u64, n: usize) -> Vec<Complex64> {
    let mut s = Stream::new(seed, GAIN_STREAM);
    (0..n).map(|_| s.complex_normal()).collect()
}

pub fn truth_table(
    cfg: &SimConfig,
    scatterers: &[Scatterer],
    beta: &[Complex64],
) -> Result<SceneTruth> {
    if beta.len() != scatterers.len() {
        return Err(IsarError::Dimension(format!(
            "{} gains for {} scatterers",
            beta.len(),
            scatterers.len()
        )));
    }
    let ts = cfg.symbol_period();
    let lambda = cfg.wavelength();
    let frames = (0..cfg.num_frames())
        .into_par_iter()
        .map(|m| {
            kinematics(cfg, scatterers, m)
                .iter()
                .zip(scatterers)
                .map(|(k, s)| {
                    if !(k.range > 0.0) {
                        return Err(IsarError::InvalidArgument(
                            "scatterer coincides with the array".into(),
                        ));
                    }
                    let tau = 2.0 * k.range / SPEED_OF_LIGHT;
                    let ell = (tau / ts).floor();
                    Ok(ScatterTruth {
                        r: k.range,
                        tau,
                        ell: ell as i64,
                        tau_f: tau - ell * ts,
                        nu: doppler_from_range_rate(k.range_rate, lambda),
                        phi: k.phi,
                        theta: k.theta,
                        g: large_scale_gain(cfg, k.range, s.rcs_m2)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneTruth {
        frames,
        beta: beta.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> (SimConfig, Vec<Scatterer>, SceneTruth) {
        let cfg = SimConfig::default();
        let v = vehicle_for(&cfg).unwrap();
        let beta = draw_betas(cfg.seed, v.len());
        let t = truth_table(&cfg, &v, &beta).unwrap();
        (cfg, v, t)
    }

    #[test]
    fn default_vehicle_shape() {
        let v = default_vehicle();
        assert_eq!(v.len(), 22);
        let total: f64 = v.iter().map(|s| s.rcs_m2).sum();
        assert!((total - 100.0).abs() < 1e-9);
        let xs = v.iter().map(|s| s.offset[0]);
        let span = xs.clone().fold(f64::MIN, f64::max) - xs.fold(f64::MAX, f64::min);
        assert!((span - 5.0).abs() < 1e-12);
        let zs = v.iter().map(|s| s.offset[2]);
        let height = zs.clone().fold(f64::MIN, f64::max) - zs.fold(f64::MAX, f64::min);
        assert!(height <= 1.5);
        assert!(v.iter().all(|s| (0.0..=2.0).contains(&s.offset[1])));
    }

    #[test]
    fn reference_point_range_and_delay() {
        let cfg = SimConfig::default();
        let k = kinematics(&cfg, &[Scatterer { offset: [0.0; 3], rcs_m2: 1.0 }], 0)[0];
        assert!((k.range - 449f64.sqrt()).abs() < 1e-12);
        assert_eq!(k.range_rate, 0.0);
        let t = truth_table(&cfg, &[Scatterer { offset: [0.0; 3], rcs_m2: 1.0 }], &[Complex64::new(1.0, 0.0)])
            .unwrap();
        let tau = 2.0 * 449f64.sqrt() / SPEED_OF_LIGHT;
        assert!((t.at(0, 0).tau - tau).abs() < 1e-20);
        assert_eq!(t.at(0, 0).ell, 248);
        assert_eq!(t.at(0, 0).nu, 0.0);
    }

    #[test]
    fn displacement_over_cpi() {
        let cfg = SimConfig::default();
        let m = cfg.num_frames() - 1;
        let k = kinematics(&cfg, &[Scatterer { offset: [0.0; 3], rcs_m2: 1.0 }], m)[0];
        assert!((k.position[0] - 0.4).abs() < 0.001);
    }

    #[test]
    fn head_on_doppler() {
        let cfg = SimConfig::default();
        let nu = doppler_from_range_rate(-40.0, cfg.wavelength());
        assert!((nu - 2.0 * 40.0 * 60e9 / SPEED_OF_LIGHT).abs() < 1e-9);
        assert!((nu - 16_011.0).abs() < 0.1);
    }

    #[test]
    fn gain_scaling() {
        let cfg = SimConfig::default();
        let g = large_scale_gain(&cfg, 449f64.sqrt(), 100.0 / 22.0).unwrap();
        let g2 = large_scale_gain(&cfg, 2.0 * 449f64.sqrt(), 100.0 / 22.0).unwrap();
        let g3 = large_scale_gain(&cfg, 449f64.sqrt(), 200.0 / 22.0).unwrap();
        assert!((g / g2 - 16.0).abs() < 1e-9);
        assert!((g3 / g - 2.0).abs() < 1e-12);
        let lambda = SPEED_OF_LIGHT / 60e9;
        let want = (100.0 / 22.0) * lambda * lambda / ((4.0 * PI).powi(3) * 449.0 * 449.0);
        assert!((g - want).abs() <= 1e-12 * want);
        assert!((g - 2.836_572_905_025_21e-13).abs() < 1e-26, "{g:e}");
        assert!(large_scale_gain(&cfg, 0.0, 1.0).is_err());
    }

    #[test]
    fn bins_8_6_cm_apart_differ() {
        let cfg = SimConfig::default();
        let dr = cfg.range_resolution();
        assert!((dr - 0.0852).abs() < 1e-4);
        let ts = cfg.symbol_period();
        let ell = |r: f64| (2.0 * r / SPEED_OF_LIGHT / ts).floor() as i64;
        assert_ne!(ell(21.0), ell(21.086));
    }

    #[test]
    fn delay_decomposition_is_exact() {
        let (cfg, _, t) = scene();
        let ts = cfg.symbol_period();
        for frame in &t.frames {
            for s in frame {
                assert!((0.0..ts).contains(&s.tau_f));
                let back = s.ell as f64 * ts + s.tau_f;
                assert!((back - s.tau).abs() <= f64::EPSILON * s.tau);
            }
        }
    }

    #[test]
    fn delay_set_is_frame_invariant_and_distinct() {
        let (_, v, t) = scene();
        let first = t.delay_set(0);
        assert_eq!(first.len(), v.len());
        for m in 0..t.num_frames() {
            for p in 0..v.len() {
                assert_eq!(t.at(p, m).ell, t.at(p, 0).ell);
            }
        }
    }

    #[test]
    fn doppler_is_monotone_with_near_constant_step() {
        let (_, v, t) = scene();
        let mm = t.num_frames();
        for p in 0..v.len() {
            let steps: Vec<f64> = (1..mm).map(|m| t.at(p, m).nu - t.at(p, m - 1).nu).collect();
            assert!(steps.iter().all(|&d| d < 0.0), "scatterer {p} not monotone");
            let lo = steps.iter().copied().fold(f64::MAX, f64::min);
            let hi = steps.iter().copied().fold(f64::MIN, f64::max);
            assert!((hi - lo) / hi.abs() < 0.01, "scatterer {p}: {lo} .. {hi}");
        }
    }

    #[test]
    fn vehicle_csv_errors() {
        assert!(parse_vehicle_csv("x_m,y_m,z_m,rcs_share\n").is_err());
        assert!(parse_vehicle_csv("x_m,y_m,z_m,rcs_share\n1,2,3,-1\n").is_err());
        assert!(parse_vehicle_csv("x_m,y_m,z_m,rcs_share\n1,2,three,1\n").is_err());
        let v = parse_vehicle_csv("# c\nx_m,y_m,z_m,rcs_share\n1, 2, 3, 0.5\n").unwrap();
        assert_eq!(v[0].offset, [1.0, 2.0, 3.0]);
    }
}
