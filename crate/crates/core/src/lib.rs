//! Waveform-level ISAR simulation and estimation on the IEEE 802.11ad
//! single-carrier preamble.
//!
//! The chain runs scene geometry -> received frames -> delay, coefficient,
//! Doppler and velocity estimates -> range/cross-range image. Each stage is a
//! plain function over immutable inputs; [`pipeline`] wires them together.

pub mod config;
pub mod doppler;
pub mod error;
pub mod frontend;
pub mod golay;
pub mod imaging;
pub mod io;
pub mod lse;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod delay;

pub use config::{SimConfig, ThresholdMode, WrapMethod};
pub use error::{IsarError, Result};

pub use num_complex::Complex64;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
