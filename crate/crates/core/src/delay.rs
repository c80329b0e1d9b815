//! Sampled-delay detection by correlation against s512.

use num_complex::Complex64;

use crate::config::SimConfig;
use crate::error::{IsarError, Result};
use crate::frontend::FrameSamples;
use crate::golay::{xcorr_s512, S512_LEN, S512_OFFSET};

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySet {
    /// Detected sampled delays, strictly increasing.
    pub ells: Vec<i64>,
    /// Index into `ells` of the strongest lag.
    pub ell_max_idx: usize,
}

impl DelaySet {
    pub fn len(&self) -> usize {
        self.ells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ells.is_empty()
    }

    pub fn first(&self) -> i64 {
        self.ells[0]
    }

    pub fn last(&self) -> i64 {
        self.ells[self.ells.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Absolute threshold on `|R|` (noise-driven part).
    pub threshold: f64,
    /// Floor relative to the strongest correlation.
    pub rel_floor: f64,
    /// Window below and above the strongest lag, samples.
    pub back: usize,
    pub fwd: usize,
}

impl DetectParams {
    pub fn from_config(cfg: &SimConfig, sigma_nc2: f64) -> Self {
        let (back, fwd) = cfg.search_window();
        DetectParams {
            threshold: cfg.threshold_multiplier() * sigma_nc2.sqrt(),
            rel_floor: cfg.detect_rel_floor,
            back,
            fwd,
        }
    }
}

/// Full correlation profile of a frame, as `(ell, R)` pairs where `ell` is
/// the candidate sampled delay.
pub fn correlation_profile(frame: &FrameSamples, s512: &[i8]) -> Result<Vec<(i64, Complex64)>> {
    if frame.y.len() < S512_LEN {
        return Err(IsarError::InvalidArgument("frame shorter than s512".into()));
    }
    let lags = 0..frame.y.len() - S512_LEN + 1;
    let r = xcorr_s512(s512, &frame.y, lags)?;
    let base = frame.start - S512_OFFSET as i64;
    Ok(r.into_iter()
        .enumerate()
        .map(|(j, v)| (base + j as i64, v))
        .collect())
}

/// Strongest lag over the full profile, then every lag in the window around
/// it whose correlation magnitude exceeds `max(threshold, rel_floor * peak)`.
pub fn detect_delays(frame: &FrameSamples, s512: &[i8], params: &DetectParams) -> Result<DelaySet> {
    let profile = correlation_profile(frame, s512)?;
    let mags: Vec<f64> = profile.iter().map(|(_, r)| r.norm()).collect();
    let jmax = mags
        .iter()
        .enumerate()
        .fold(0, |best, (j, &v)| if v > mags[best] { j } else { best });
    let peak = mags[jmax];
    let threshold = params.threshold.max(params.rel_floor * peak);
    if !(peak > threshold) {
        return Err(IsarError::NoTargetDetected { threshold });
    }
    if jmax < params.back || jmax + params.fwd >= mags.len() {
        return Err(IsarError::InvalidArgument(format!(
            "search window [-{}, +{}] around lag {} leaves the frame",
            params.back, params.fwd, profile[jmax].0
        )));
    }
    let mut ells = Vec::new();
    let mut ell_max_idx = 0;
    for j in jmax - params.back..=jmax + params.fwd {
        if mags[j] > threshold {
            if j == jmax {
                ell_max_idx = ells.len();
            }
            ells.push(profile[j].0);
        }
    }
    Ok(DelaySet { ells, ell_max_idx })
}
