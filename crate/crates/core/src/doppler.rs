//! Per-frame Doppler estimates, phase-wrap correction, propagation across
//! the CPI, and the velocity estimate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::config::{SimConfig, WrapMethod};
use crate::delay::DelaySet;
use crate::error::{IsarError, Result};

/// `D_m`, the inverse of `2 pi ((ell_first + ell_last + K - 1) / 2 + m N_f) T_s`.
pub fn inv_denominator(cfg: &SimConfig, delays: &DelaySet, m: usize) -> f64 {
    let mid = (delays.first() + delays.last() + cfg.train_len as i64 - 1) as f64 / 2.0;
    1.0 / (2.0 * PI * (mid + (m * cfg.frame_spacing) as f64) * cfg.symbol_period())
}

/// `angle(h_m / h_0)` in `(-pi, pi]`, or NaN when the reference is zero.
pub fn wrapped_phase(h_m: Complex64, h_0: Complex64) -> f64 {
    if h_0 == Complex64::new(0.0, 0.0) || !h_0.is_finite() || !h_m.is_finite() {
        return f64::NAN;
    }
    let a = (h_m * h_0.conj()).arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Raw Doppler of every scatterer at frame `m`: wrapped phase times `D_m`.
pub fn doppler_raw(
    h_m: &[Complex64],
    h_0: &[Complex64],
    m: usize,
    delays: &DelaySet,
    cfg: &SimConfig,
) -> Vec<f64> {
    let d = inv_denominator(cfg, delays, m);
    h_m.iter()
        .zip(h_0)
        .map(|(&a, &b)| wrapped_phase(a, b) * d)
        .collect()
}

/// Integer wrap count shared by the pair `(m, m - i)` from the uncertainty
/// corrector `c = |nu_m| - |nu_{m-i}|`.
///
/// Returns the corrected pair and the count. The branch follows the sign of
/// the wrapped phase at frame `m`, which is the sign of `nu_m`.
pub fn wrap_correct(nu_m: f64, nu_m_minus_i: f64, d_m: f64, d_m_minus_i: f64) -> (f64, f64, i64) {
    assert!(
        d_m_minus_i != d_m,
        "D must differ between the two frames of the pair"
    );
    let c = nu_m.abs() - nu_m_minus_i.abs();
    let x = c / (2.0 * PI * (d_m_minus_i - d_m));
    let m_bar = if nu_m >= 0.0 { x.round() } else { (-x).round() } as i64;
    let k = 2.0 * PI * m_bar as f64;
    (nu_m + k * d_m, nu_m_minus_i + k * d_m_minus_i, m_bar)
}

/// Per-frame wrap counts from sequentially unwrapping a phase history that
/// starts at frame 0.
pub fn track_wrap_counts(phases: &[f64]) -> Vec<i64> {
    let mut counts = Vec::with_capacity(phases.len());
    let mut unwrapped = 0.0;
    let mut prev = 0.0;
    for (m, &psi) in phases.iter().enumerate() {
        if m == 0 {
            unwrapped = psi;
        } else {
            let step = psi - prev;
            unwrapped += step - 2.0 * PI * (step / (2.0 * PI)).round();
        }
        prev = psi;
        counts.push(((unwrapped - psi) / (2.0 * PI)).round() as i64);
    }
    counts
}

/// Order statistic at index `floor((n - 1) / 2)`, ignoring NaN.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct DopplerMatrix {
    /// `raw[p][m]`, Hz.
    pub raw: Vec<Vec<f64>>,
    /// `corrected[p][m]`, Hz; affine in `m` with slope `delta_med`.
    pub corrected: Vec<Vec<f64>>,
    pub delta_med: f64,
    pub i_gap: usize,
    pub anchor_m: usize,
    /// Wrap counts applied at `anchor_m` and `anchor_m - i_gap`.
    pub wraps: Vec<(i64, i64)>,
    /// Scatterers dropped from the median (zero reference coefficient).
    pub excluded: Vec<bool>,
}

/// Anchors the Doppler of every scatterer at frame `M - 1`, takes the
/// difference to frame `M - 1 - i` and spreads the median slope over the CPI.
pub fn doppler_difference_and_propagate(
    h_hat: &[Vec<Complex64>],
    delays: &DelaySet,
    cfg: &SimConfig,
) -> Result<DopplerMatrix> {
    let frames = h_hat.len();
    let i = cfg.i_gap;
    if i == 0 || i >= frames {
        return Err(IsarError::InvalidArgument(format!(
            "i_gap {i} needs more than {i} frames, got {frames}"
        )));
    }
    let np = delays.len();
    if h_hat.iter().any(|h| h.len() != np) {
        return Err(IsarError::Dimension("coefficient vectors differ in length".into()));
    }
    let a = frames - 1;
    let b = a - i;
    let d: Vec<f64> = (0..frames).map(|m| inv_denominator(cfg, delays, m)).collect();

    let mut phases = vec![vec![0.0; frames]; np];
    for (m, h_m) in h_hat.iter().enumerate() {
        for p in 0..np {
            phases[p][m] = wrapped_phase(h_m[p], h_hat[0][p]);
        }
    }
    let raw: Vec<Vec<f64>> = phases
        .iter()
        .map(|row| row.iter().zip(&d).map(|(psi, dm)| psi * dm).collect())
        .collect();
    let excluded: Vec<bool> = phases.iter().map(|row| row[0].is_nan()).collect();

    let mut anchor = vec![f64::NAN; np];
    let mut deltas = vec![f64::NAN; np];
    let mut wraps = vec![(0, 0); np];
    for p in 0..np {
        if excluded[p] {
            continue;
        }
        let (na, nb, w) = match cfg.wrap_method {
            WrapMethod::Pair => {
                let (na, nb, m_bar) = wrap_correct(raw[p][a], raw[p][b], d[a], d[b]);
                (na, nb, (m_bar, m_bar))
            }
            WrapMethod::Track => {
                let counts = track_wrap_counts(&phases[p]);
                let k = |m: usize| raw[p][m] + 2.0 * PI * counts[m] as f64 * d[m];
                (k(a), k(b), (counts[a], counts[b]))
            }
        };
        anchor[p] = na;
        deltas[p] = (na - nb) / i as f64;
        wraps[p] = w;
    }
    let delta_med = lower_median(&deltas).ok_or_else(|| {
        IsarError::InvalidArgument("every scatterer lacks a usable reference coefficient".into())
    })?;
    let corrected = anchor
        .iter()
        .map(|&na| {
            (0..frames)
                .map(|u| na + (u as f64 - a as f64) * delta_med)
                .collect()
        })
        .collect();
    Ok(DopplerMatrix {
        raw,
        corrected,
        delta_med,
        i_gap: i,
        anchor_m: a,
        wraps,
        excluded,
    })
}

/// Per-scatterer `sqrt(lambda R0 (nu_0 - nu_{M-1}) / (2 CPI))`, medianed.
pub fn estimate_velocity(dm: &DopplerMatrix, cfg: &SimConfig) -> Result<f64> {
    let k = cfg.wavelength() * cfg.r0() / (2.0 * cfg.cpi_s);
    let mut first_bad = None;
    let mut vs = Vec::new();
    for (p, row) in dm.corrected.iter().enumerate() {
        if dm.excluded[p] {
            continue;
        }
        let rad = k * (row[0] - row[dm.anchor_m]);
        if rad < 0.0 {
            first_bad.get_or_insert(p);
            continue;
        }
        vs.push(rad.sqrt());
    }
    match lower_median(&vs) {
        Some(v) => Ok(v),
        None => Err(IsarError::NegativeRadicand {
            index: first_bad.unwrap_or(0),
        }),
    }
}
