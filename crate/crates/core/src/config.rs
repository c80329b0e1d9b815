//! Run configuration.
//!
//! The on-disk format is a flat `key = value` text file. Blank lines and
//! anything after `#` are ignored. Every key has a default, so an empty file
//! yields the 60 GHz vehicular scenario (8x8 arrays, 40 m/s, 10 ms CPI).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{IsarError, Result};
use crate::SPEED_OF_LIGHT;

/// How the delay-detection threshold is derived from the noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// `sigma_th = threshold_mult * sigma_nc`.
    Fixed,
    /// Cauchy-Schwarz bound `||s512|| * ||z||`, i.e. `512 * sigma_nc`.
    Bound,
    /// `kappa * sqrt(512) * sigma_nc` with `kappa = sqrt(ln(1 / false_alarm_prob))`,
    /// the per-lag false-alarm rate of a circular Gaussian correlator output.
    Calibrated,
}

/// How integer phase-wrap counts are resolved at the anchor frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapMethod {
    /// Uncertainty corrector on the anchor pair alone (|nu_m| - |nu_{m-i}|).
    Pair,
    /// Wrap counts from the phase history unwrapped frame by frame.
    Track,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Bandwidth, Hz. The symbol period is its inverse.
    pub bandwidth_hz: f64,
    /// Training samples per frame.
    pub train_len: usize,
    /// Frame spacing in samples, used for both synthesis and estimation.
    pub frame_spacing: usize,
    /// Coherent processing interval, s.
    pub cpi_s: f64,
    pub tx_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub clutter_power_dbm: f64,
    /// Total vehicle RCS, dBsm.
    pub rcs_dbsm: f64,
    pub path_loss_exp: f64,
    /// Initial vehicle reference position, m.
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
    /// Vehicle extents, m.
    pub xv: f64,
    pub yv: f64,
    pub zv: f64,
    /// Vehicle speed along +x, m/s.
    pub vx: f64,
    pub nx_tx: usize,
    pub ny_tx: usize,
    pub nx_rx: usize,
    pub ny_rx: usize,
    /// Antenna spacing in wavelengths (both axes).
    pub spacing_wl: f64,
    /// Frame gap for the Doppler difference.
    pub i_gap: usize,
    /// Image projection plane, m.
    pub x_size: f64,
    pub y_size: f64,
    pub seed: u64,
    pub noiseless: bool,
    pub threshold_mode: ThresholdMode,
    pub threshold_mult: f64,
    pub false_alarm_prob: f64,
    /// Noise-free detection floor relative to the correlation peak.
    pub detect_rel_floor: f64,
    /// Search window below/above the strongest lag; 0 selects the automatic size.
    pub search_back: usize,
    pub search_fwd: usize,
    pub wrap_method: WrapMethod,
    /// Optional vehicle CSV; the built-in sedan model is used when absent.
    pub vehicle_file: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            carrier_hz: 60e9,
            bandwidth_hz: 1.76e9,
            train_len: 3328,
            frame_spacing: 13632,
            cpi_s: 10e-3,
            tx_power_dbm: 30.0,
            noise_density_dbm_hz: -174.0,
            clutter_power_dbm: -72.275,
            rcs_dbsm: 20.0,
            path_loss_exp: 2.0,
            x0: 0.0,
            y0: 20.0,
            z0: -7.0,
            xv: 5.0,
            yv: 2.0,
            zv: 1.5,
            vx: 40.0,
            nx_tx: 8,
            ny_tx: 8,
            nx_rx: 8,
            ny_rx: 8,
            spacing_wl: 0.5,
            i_gap: 6,
            x_size: 15.0,
            y_size: 20.0,
            seed: 1,
            noiseless: false,
            threshold_mode: ThresholdMode::Calibrated,
            threshold_mult: 512.0,
            false_alarm_prob: 1e-4,
            detect_rel_floor: 1e-3,
            search_back: 0,
            search_fwd: 0,
            wrap_method: WrapMethod::Track,
            vehicle_file: None,
        }
    }
}

/// Zero-sidelobe extent of the s512 correlation below and above a peak.
pub const ZERO_ZONE_BACK: usize = 64;
pub const ZERO_ZONE_FWD: usize = 128;

impl SimConfig {
    pub fn symbol_period(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Frames per CPI, `floor(CPI / (N_f T_s))`.
    pub fn num_frames(&self) -> usize {
        let frames = self.cpi_s * self.bandwidth_hz / self.frame_spacing as f64;
        (frames + 1e-9).floor() as usize
    }

    /// Range resolution `c / 2W`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    /// Start time of frame `m`, s.
    pub fn frame_time(&self, m: usize) -> f64 {
        (m * self.frame_spacing) as f64 * self.symbol_period()
    }

    /// Distance from the array to the vehicle reference point.
    pub fn r0(&self) -> f64 {
        (self.x0 * self.x0 + self.y0 * self.y0 + self.z0 * self.z0).sqrt()
    }

    /// Symbol energy `P_tx * T_s`, J.
    pub fn symbol_energy(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm) * self.symbol_period()
    }

    /// Noise-plus-clutter power `N_o W + P_c`, W.
    pub fn noise_clutter_power(&self) -> f64 {
        dbm_to_watts(self.noise_density_dbm_hz) * self.bandwidth_hz
            + dbm_to_watts(self.clutter_power_dbm)
    }

    /// Per-sample noise variance on the same energy scale as the symbol
    /// energy, `(N_o W + P_c) T_s`. Zero when running noiseless.
    pub fn sample_noise_variance(&self) -> f64 {
        if self.noiseless {
            0.0
        } else {
            self.noise_clutter_power() * self.symbol_period()
        }
    }

    /// Threshold multiplier applied to `sigma_nc`.
    pub fn threshold_multiplier(&self) -> f64 {
        match self.threshold_mode {
            ThresholdMode::Fixed => self.threshold_mult,
            ThresholdMode::Bound => 512.0,
            ThresholdMode::Calibrated => {
                (1.0 / self.false_alarm_prob).ln().sqrt() * 512f64.sqrt()
            }
        }
    }

    /// Search window (below, above) the strongest lag.
    ///
    /// The automatic size is `ceil(1.5 Xv / dr)` clamped to half of each
    /// zero-sidelobe zone, so every scatterer in the window also sits inside
    /// every other scatterer's sidelobe-free span.
    pub fn search_window(&self) -> (usize, usize) {
        let wanted = (1.5 * self.xv / self.range_resolution()).ceil() as usize;
        let back = if self.search_back > 0 {
            self.search_back
        } else {
            wanted.min(ZERO_ZONE_BACK / 2)
        };
        let fwd = if self.search_fwd > 0 {
            self.search_fwd
        } else {
            wanted.min(ZERO_ZONE_FWD / 2)
        };
        (back, fwd)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(IsarError::Config(msg));
        for (name, v) in [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("cpi_s", self.cpi_s),
            ("x_size", self.x_size),
            ("y_size", self.y_size),
            ("spacing_wl", self.spacing_wl),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_density_dbm_hz", self.noise_density_dbm_hz),
            ("clutter_power_dbm", self.clutter_power_dbm),
            ("rcs_dbsm", self.rcs_dbsm),
            ("path_loss_exp", self.path_loss_exp),
            ("x0", self.x0),
            ("y0", self.y0),
            ("z0", self.z0),
            ("vx", self.vx),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.train_len != crate::golay::PREAMBLE_LEN {
            return bad(format!(
                "train_len must equal the preamble length {}",
                crate::golay::PREAMBLE_LEN
            ));
        }
        if self.frame_spacing < self.train_len {
            return bad("frame_spacing must be at least train_len".into());
        }
        if self.nx_tx == 0 || self.ny_tx == 0 || self.nx_rx == 0 || self.ny_rx == 0 {
            return bad("array dimensions must be at least 1".into());
        }
        if self.i_gap == 0 {
            return bad("i_gap must be at least 1".into());
        }
        let m = self.num_frames();
        if m <= self.i_gap {
            return bad(format!("M must exceed i_gap (M = {m}, i_gap = {})", self.i_gap));
        }
        if self.r0() <= 0.0 {
            return bad("vehicle reference point coincides with the array".into());
        }
        if self.threshold_mode == ThresholdMode::Calibrated
            && !(self.false_alarm_prob > 0.0 && self.false_alarm_prob < 1.0)
        {
            return bad("false_alarm_prob must lie in (0, 1)".into());
        }
        if !(self.threshold_mult.is_finite() && self.threshold_mult >= 0.0) {
            return bad("threshold_mult must be non-negative".into());
        }
        if !(self.detect_rel_floor >= 0.0 && self.detect_rel_floor < 1.0) {
            return bad("detect_rel_floor must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// Names accepted by [`SimConfig::set`], in file order.
    pub const KEYS: &'static [&'static str] = &[
        "carrier_hz",
        "bandwidth_hz",
        "train_len",
        "frame_spacing",
        "cpi_s",
        "tx_power_dbm",
        "noise_density_dbm_hz",
        "clutter_power_dbm",
        "rcs_dbsm",
        "path_loss_exp",
        "x0",
        "y0",
        "z0",
        "xv",
        "yv",
        "zv",
        "vx",
        "nx_tx",
        "ny_tx",
        "nx_rx",
        "ny_rx",
        "spacing_wl",
        "i_gap",
        "x_size",
        "y_size",
        "seed",
        "noiseless",
        "threshold_mode",
        "threshold_mult",
        "false_alarm_prob",
        "detect_rel_floor",
        "search_back",
        "search_fwd",
        "wrap_method",
        "vehicle_file",
    ];

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| IsarError::Config(format!("cannot parse {key} = {v:?}")))
        }
        let v = value.trim();
        match key {
            "carrier_hz" => self.carrier_hz = num(key, v)?,
            "bandwidth_hz" => self.bandwidth_hz = num(key, v)?,
            "train_len" => self.train_len = num(key, v)?,
            "frame_spacing" => self.frame_spacing = num(key, v)?,
            "cpi_s" => self.cpi_s = num(key, v)?,
            "tx_power_dbm" => self.tx_power_dbm = num(key, v)?,
            "noise_density_dbm_hz" => self.noise_density_dbm_hz = num(key, v)?,
            "clutter_power_dbm" => self.clutter_power_dbm = num(key, v)?,
            "rcs_dbsm" => self.rcs_dbsm = num(key, v)?,
            "path_loss_exp" => self.path_loss_exp = num(key, v)?,
            "x0" => self.x0 = num(key, v)?,
            "y0" => self.y0 = num(key, v)?,
            "z0" => self.z0 = num(key, v)?,
            "xv" => self.xv = num(key, v)?,
            "yv" => self.yv = num(key, v)?,
            "zv" => self.zv = num(key, v)?,
            "vx" => self.vx = num(key, v)?,
            "nx_tx" => self.nx_tx = num(key, v)?,
            "ny_tx" => self.ny_tx = num(key, v)?,
            "nx_rx" => self.nx_rx = num(key, v)?,
            "ny_rx" => self.ny_rx = num(key, v)?,
            "spacing_wl" => self.spacing_wl = num(key, v)?,
            "i_gap" => self.i_gap = num(key, v)?,
            "x_size" => self.x_size = num(key, v)?,
            "y_size" => self.y_size = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "noiseless" => self.noiseless = num(key, v)?,
            "threshold_mode" => {
                self.threshold_mode = match v {
                    "fixed" => ThresholdMode::Fixed,
                    "bound" => ThresholdMode::Bound,
                    "calibrated" => ThresholdMode::Calibrated,
                    _ => {
                        return Err(IsarError::Config(format!(
                            "threshold_mode must be fixed, bound or calibrated, got {v:?}"
                        )))
                    }
                }
            }
            "threshold_mult" => self.threshold_mult = num(key, v)?,
            "false_alarm_prob" => self.false_alarm_prob = num(key, v)?,
            "detect_rel_floor" => self.detect_rel_floor = num(key, v)?,
            "search_back" => self.search_back = num(key, v)?,
            "search_fwd" => self.search_fwd = num(key, v)?,
            "wrap_method" => {
                self.wrap_method = match v {
                    "pair" => WrapMethod::Pair,
                    "track" => WrapMethod::Track,
                    _ => {
                        return Err(IsarError::Config(format!(
                            "wrap_method must be pair or track, got {v:?}"
                        )))
                    }
                }
            }
            "vehicle_file" => {
                self.vehicle_file = if v.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            _ => return Err(IsarError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Textual value of one field, in the form [`SimConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "carrier_hz" => self.carrier_hz.to_string(),
            "bandwidth_hz" => self.bandwidth_hz.to_string(),
            "train_len" => self.train_len.to_string(),
            "frame_spacing" => self.frame_spacing.to_string(),
            "cpi_s" => self.cpi_s.to_string(),
            "tx_power_dbm" => self.tx_power_dbm.to_string(),
            "noise_density_dbm_hz" => self.noise_density_dbm_hz.to_string(),
            "clutter_power_dbm" => self.clutter_power_dbm.to_string(),
            "rcs_dbsm" => self.rcs_dbsm.to_string(),
            "path_loss_exp" => self.path_loss_exp.to_string(),
            "x0" => self.x0.to_string(),
            "y0" => self.y0.to_string(),
            "z0" => self.z0.to_string(),
            "xv" => self.xv.to_string(),
            "yv" => self.yv.to_string(),
            "zv" => self.zv.to_string(),
            "vx" => self.vx.to_string(),
            "nx_tx" => self.nx_tx.to_string(),
            "ny_tx" => self.ny_tx.to_string(),
            "nx_rx" => self.nx_rx.to_string(),
            "ny_rx" => self.ny_rx.to_string(),
            "spacing_wl" => self.spacing_wl.to_string(),
            "i_gap" => self.i_gap.to_string(),
            "x_size" => self.x_size.to_string(),
            "y_size" => self.y_size.to_string(),
            "seed" => self.seed.to_string(),
            "noiseless" => self.noiseless.to_string(),
            "threshold_mode" => match self.threshold_mode {
                ThresholdMode::Fixed => "fixed",
                ThresholdMode::Bound => "bound",
                ThresholdMode::Calibrated => "calibrated",
            }
            .to_string(),
            "threshold_mult" => self.threshold_mult.to_string(),
            "false_alarm_prob" => self.false_alarm_prob.to_string(),
            "detect_rel_floor" => self.detect_rel_floor.to_string(),
            "search_back" => self.search_back.to_string(),
            "search_fwd" => self.search_fwd.to_string(),
            "wrap_method" => match self.wrap_method {
                WrapMethod::Pair => "pair",
                WrapMethod::Track => "track",
            }
            .to_string(),
            "vehicle_file" => self
                .vehicle_file
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            _ => return None,
        };
        Some(s)
    }

    /// Parses `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                IsarError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value)
                .map_err(|e| IsarError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Emits every field, one per line, in [`SimConfig::KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# isar simulation config (SI units: Hz, s, m, m/s)\n");
        for key in Self::KEYS {
            let value = self.get(key).expect("every listed key has a value");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
