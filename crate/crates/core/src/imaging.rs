//! Range profile, cross-range signals and ISAR image formation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::config::SimConfig;
use crate::delay::DelaySet;
use crate::doppler::DopplerMatrix;
use crate::error::{IsarError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub bins: Vec<Complex64>,
    pub delta_r: f64,
    /// Sampled delay of bin 0.
    pub origin_ell: i64,
}

pub fn num_range_bins(cfg: &SimConfig) -> usize {
    (cfg.x_size / cfg.range_resolution()).floor() as usize
}

/// Sampled delay of bin 0 that centres the detected extent in the window.
pub fn range_origin(delays: &DelaySet, n_r: usize) -> i64 {
    (delays.first() + delays.last()).div_euclid(2) - (n_r / 2) as i64
}

pub fn range_profile(delays: &DelaySet, h_hat: &[Complex64], cfg: &SimConfig) -> Result<RangeProfile> {
    if delays.len() != h_hat.len() {
        return Err(IsarError::Dimension(format!(
            "{} delays for {} coefficients",
            delays.len(),
            h_hat.len()
        )));
    }
    let n_r = num_range_bins(cfg);
    let mut bins = vec![Complex64::new(0.0, 0.0); n_r];
    if delays.is_empty() {
        return Ok(RangeProfile { bins, delta_r: cfg.range_resolution(), origin_ell: 0 });
    }
    let origin = range_origin(delays, n_r);
    for (&ell, &h) in delays.ells.iter().zip(h_hat) {
        let bin = ell - origin;
        if bin < 0 || bin >= n_r as i64 {
            return Err(IsarError::InvalidArgument(format!(
                "delay {ell} falls outside the {n_r}-bin range window"
            )));
        }
        bins[bin as usize] += h;
    }
    Ok(RangeProfile {
        bins,
        delta_r: cfg.range_resolution(),
        origin_ell: origin,
    })
}

/// `omega = V cos(atan(X0 / Y0)) / R0`.
pub fn rotational_velocity(v_hat: f64, cfg: &SimConfig) -> f64 {
    v_hat * (cfg.x0 / cfg.y0).atan().cos() / cfg.r0()
}

/// `lambda W_D / (2 M omega)` with `W_D = 2 omega Y_size f_c / c`, which
/// reduces to `Y_size / M` for any `omega`.
pub fn cross_range_resolution(cfg: &SimConfig) -> f64 {
    cfg.y_size / cfg.num_frames() as f64
}

/// Cross-range bin coordinate `nu * c / (2 f_c omega dcr)` of each scatterer,
/// from its corrected Doppler at the anchor frame.
pub fn cross_range_bins(dm: &DopplerMatrix, omega: f64, cfg: &SimConfig) -> Result<Vec<f64>> {
    if !(omega > 0.0) {
        return Err(IsarError::InvalidArgument(format!(
            "rotational velocity must be positive, got {omega}"
        )));
    }
    let scale = cfg.wavelength() / (2.0 * omega * cross_range_resolution(cfg));
    Ok(dm.corrected.iter().map(|row| row[dm.anchor_m] * scale).collect())
}

/// `CR_p[m] = exp(j 2 pi b_p m / M)`.
pub fn cross_range_signal(bins: &[f64], frames: usize) -> Vec<Vec<Complex64>> {
    bins.iter()
        .map(|&b| {
            (0..frames)
                .map(|m| Complex64::from_polar(1.0, 2.0 * PI * b * m as f64 / frames as f64))
                .collect()
        })
        .collect()
}

/// Image column holding FFT bin `f` (which may be negative) after centring.
pub fn centred_column(f: f64, n: usize) -> f64 {
    f + (n / 2) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsarImage {
    /// `grid[range_bin][cross_range_bin]`, magnitudes.
    pub grid: Vec<Vec<f64>>,
    pub delta_r: f64,
    pub delta_cr: f64,
    pub origin_ell: i64,
    pub flipped: bool,
}

impl IsarImage {
    pub fn n_r(&self) -> usize {
        self.grid.len()
    }

    pub fn n_cr(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }

    /// Mirror of the cross-range axis.
    pub fn flip(&self) -> IsarImage {
        IsarImage {
            grid: self
                .grid
                .iter()
                .map(|row| row.iter().rev().copied().collect())
                .collect(),
            flipped: !self.flipped,
            ..self.clone()
        }
    }

    pub fn row_argmax(&self, row: usize) -> usize {
        let r = &self.grid[row];
        (0..r.len()).fold(0, |best, c| if r[c] > r[best] { c } else { best })
    }

    pub fn max_value(&self) -> f64 {
        self.grid.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Sums `h_hat[p] CR_p` into the row of scatterer `p`, FFTs along
/// cross-range and centres zero Doppler at column `floor(M / 2)`.
pub fn form_image(
    profile: &RangeProfile,
    delays: &DelaySet,
    h_hat: &[Complex64],
    cr: &[Vec<Complex64>],
    cfg: &SimConfig,
) -> Result<IsarImage> {
    let m = cfg.num_frames();
    if delays.len() != h_hat.len() || delays.len() != cr.len() {
        return Err(IsarError::Dimension(format!(
            "{} delays, {} coefficients, {} cross-range rows",
            delays.len(),
            h_hat.len(),
            cr.len()
        )));
    }
    if let Some(bad) = cr.iter().find(|row| row.len() != m) {
        return Err(IsarError::Dimension(format!(
            "cross-range row has {} samples, expected {m}",
            bad.len()
        )));
    }
    let n_r = profile.bins.len();
    let mut rows: Vec<Option<Vec<Complex64>>> = vec![None; n_r];
    for ((&ell, &h), signal) in delays.ells.iter().zip(h_hat).zip(cr) {
        let bin = ell - profile.origin_ell;
        if bin < 0 || bin >= n_r as i64 {
            return Err(IsarError::InvalidArgument(format!("delay {ell} outside the profile")));
        }
        let row = rows[bin as usize].get_or_insert_with(|| vec![Complex64::new(0.0, 0.0); m]);
        for (acc, s) in row.iter_mut().zip(signal) {
            *acc += h * s;
        }
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let grid = rows
        .into_par_iter()
        .map(|row| match row {
            None => vec![0.0; m],
            Some(mut buf) => {
                fft.process(&mut buf);
                let mut out = vec![0.0; m];
                for (k, v) in buf.iter().enumerate() {
                    let f = if k < m.div_ceil(2) { k as f64 } else { k as f64 - m as f64 };
                    out[centred_column(f, m) as usize] = v.norm();
                }
                out
            }
        })
        .collect();
    Ok(IsarImage {
        grid,
        delta_r: profile.delta_r,
        delta_cr: cross_range_resolution(cfg),
        origin_ell: profile.origin_ell,
        flipped: false,
    })
}

/// Number of `(row, col)` targets for which some row within one bin has its
/// strongest pixel within one column of the target.
pub fn count_peak_matches(image: &IsarImage, targets: &[(i64, i64)]) -> usize {
    targets
        .iter()
        .filter(|&&(rt, ct)| {
            (rt - 1..=rt + 1).any(|r| {
                r >= 0
                    && (r as usize) < image.n_r()
                    && image.grid[r as usize].iter().any(|&v| v > 0.0)
                    && (image.row_argmax(r as usize) as i64 - ct).abs() <= 1
            })
        })
        .count()
}
