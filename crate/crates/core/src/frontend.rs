//! Array response, beamforming and received-frame synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{IsarError, Result};
use crate::golay::Preamble;
use crate::rng::{frame_stream, Stream};
use crate::scene::SceneTruth;

pub fn spatial_frequencies(phi: f64, theta: f64, dx: f64, dy: f64, lambda: f64) -> (f64, f64) {
    (
        2.0 * PI * dx * theta.cos() * phi.sin() / lambda,
        2.0 * PI * dy * theta.sin() / lambda,
    )
}

/// UPA response, the Kronecker product of the x and y phase ramps.
/// Entry `nx * ny_len + ny` is `exp(j (nx wx + ny wy))`.
pub fn steering_vector(wx: f64, wy: f64, nx: usize, ny: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        for iy in 0..ny {
            v.push(Complex64::from_polar(1.0, ix as f64 * wx + iy as f64 * wy));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub f_tx: Vec<Complex64>,
    pub f_rx: Vec<Complex64>,
}

fn array_response(cfg: &SimConfig, phi: f64, theta: f64, nx: usize, ny: usize) -> Vec<Complex64> {
    let lambda = cfg.wavelength();
    let d = cfg.spacing_wl * lambda;
    let (wx, wy) = spatial_frequencies(phi, theta, d, d, lambda);
    steering_vector(wx, wy, nx, ny)
}

/// Matched unit-norm beams towards the vehicle reference point at `t = 0`.
pub fn design_beamformers(cfg: &SimConfig) -> Beamformers {
    let r0 = cfg.r0();
    let phi = cfg.x0.atan2(cfg.y0);
    let theta = (cfg.z0 / r0).asin();
    let norm = |v: Vec<Complex64>| {
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / n).collect::<Vec<_>>()
    };
    let a_tx = array_response(cfg, phi, theta, cfg.nx_tx, cfg.ny_tx);
    let a_rx = array_response(cfg, phi, theta, cfg.nx_rx, cfg.ny_rx);
    Beamformers {
        f_tx: norm(a_tx),
        f_rx: norm(a_rx.into_iter().map(|z| z.conj()).collect()),
    }
}

/// `f_RX^H conj(a_RX) * a_TX^H f_TX` for a scatterer at `(phi, theta)`.
pub fn array_gain(cfg: &SimConfig, bf: &Beamformers, phi: f64, theta: f64) -> Complex64 {
    let a_tx = array_response(cfg, phi, theta, cfg.nx_tx, cfg.ny_tx);
    let a_rx = array_response(cfg, phi, theta, cfg.nx_rx, cfg.ny_rx);
    let rx: Complex64 = bf.f_rx.iter().zip(&a_rx).map(|(f, a)| f.conj() * a.conj()).sum();
    let tx: Complex64 = a_tx.iter().zip(&bf.f_tx).map(|(a, f)| a.conj() * f).sum();
    rx * tx
}

/// Per-scatterer backscatter coefficient from the frame-0 geometry,
/// `sqrt(G) beta f_RX^H conj(a_RX) a_TX^H f_TX`. Excludes `sqrt(Es)`.
pub fn backscatter_truth(cfg: &SimConfig, truth: &SceneTruth, bf: &Beamformers) -> Vec<Complex64> {
    truth.frames[0]
        .iter()
        .zip(&truth.beta)
        .map(|(t, beta)| t.g.sqrt() * beta * array_gain(cfg, bf, t.phi, t.theta))
        .collect()
}

/// Received training region of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSamples {
    pub m: usize,
    /// In-frame sample index of `y[0]`.
    pub start: i64,
    pub y: Vec<Complex64>,
    /// Per-sample noise variance used.
    pub sigma_nc2: f64,
}

impl FrameSamples {
    pub fn end(&self) -> i64 {
        self.start + self.y.len() as i64
    }
}

/// `y[m, k] = sum_p sqrt(Es) h_p exp(j 2 pi nu_p (k + m N_f) T_s) s[k - ell_p] + z[m, k]`
/// for `k` in `ell_min .. K - 1 + ell_max`.
pub fn synthesize_frame(
    cfg: &SimConfig,
    truth: &SceneTruth,
    h: &[Complex64],
    preamble: &Preamble,
    m: usize,
) -> Result<FrameSamples> {
    let scat = truth
        .frames
        .get(m)
        .ok_or_else(|| IsarError::InvalidArgument(format!("frame {m} outside the truth table")))?;
    if h.len() != scat.len() {
        return Err(IsarError::Dimension(format!(
            "{} coefficients for {} scatterers",
            h.len(),
            scat.len()
        )));
    }
    let k_len = preamble.len() as i64;
    let ell_min = scat.iter().map(|t| t.ell).min().unwrap_or(0);
    let ell_max = scat.iter().map(|t| t.ell).max().unwrap_or(0);
    let n = (k_len + ell_max - ell_min) as usize;
    let mut y = vec![Complex64::new(0.0, 0.0); n];

    let ts = cfg.symbol_period();
    let amp = cfg.symbol_energy().sqrt();
    let frame_offset = (m * cfg.frame_spacing) as f64;
    for (t, hp) in scat.iter().zip(h) {
        let coeff = amp * hp;
        let base = (t.ell - ell_min) as usize;
        for (i, &s) in preamble.samples.iter().enumerate() {
            let k = (t.ell + i as i64) as f64;
            let rot = Complex64::from_polar(1.0, 2.0 * PI * t.nu * (k + frame_offset) * ts);
            y[base + i] += coeff * rot * f64::from(s);
        }
    }

    let sigma2 = cfg.sample_noise_variance();
    if sigma2 > 0.0 {
        let sigma = sigma2.sqrt();
        let mut rng = Stream::new(cfg.seed, frame_stream(m));
        for v in y.iter_mut() {
            *v += sigma * rng.complex_normal();
        }
    }
    Ok(FrameSamples {
        m,
        start: ell_min,
        y,
        sigma_nc2: sigma2,
    })
}

pub fn synthesize_all(
    cfg: &SimConfig,
    truth: &SceneTruth,
    h: &[Complex64],
    preamble: &Preamble,
) -> Result<Vec<FrameSamples>> {
    (0..truth.num_frames())
        .into_par_iter()
        .map(|m| synthesize_frame(cfg, truth, h, preamble, m))
        .collect()
}
