//! File formats: frame container, estimates JSON, image exports.
//!
//! Every writer goes through [`write_atomic`], so a crash never leaves a
//! half-written artifact under the final name.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsarError, Result};
use crate::frontend::FrameSamples;
use crate::golay::Preamble;
use crate::imaging::IsarImage;

pub const FRAME_MAGIC: &[u8; 4] = b"GISR";
pub const FRAME_VERSION: u32 = 1;
/// m u32, start i64, len u64, offset u64, sigma_nc2 f64.
const TABLE_ENTRY_LEN: usize = 4 + 8 + 8 + 8 + 8;

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| IsarError::InvalidArgument(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Little-endian frame container: magic, version, frame count, one table
/// entry per frame, then interleaved `f64` re/im samples.
pub fn encode_frames(frames: &[FrameSamples]) -> Vec<u8> {
    let header = 4 + 4 + 4 + TABLE_ENTRY_LEN * frames.len();
    let total: usize = header + frames.iter().map(|f| f.y.len() * 16).sum::<usize>();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    let mut offset = header as u64;
    for f in frames {
        out.extend_from_slice(&(f.m as u32).to_le_bytes());
        out.extend_from_slice(&f.start.to_le_bytes());
        out.extend_from_slice(&(f.y.len() as u64).to_le_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&f.sigma_nc2.to_le_bytes());
        offset += f.y.len() as u64 * 16;
    }
    for f in frames {
        for v in &f.y {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(buf: &[u8], at: usize) -> Result<[u8; N]> {
    buf.get(at..at + N)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| IsarError::Format(format!("truncated at byte {at}")))
}

pub fn decode_frames(buf: &[u8]) -> Result<Vec<FrameSamples>> {
    if take::<4>(buf, 0)? != *FRAME_MAGIC {
        return Err(IsarError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(buf, 4)?);
    if version != FRAME_VERSION {
        return Err(IsarError::Format(format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(take(buf, 8)?) as usize;
    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        let at = 12 + i * TABLE_ENTRY_LEN;
        let m = u32::from_le_bytes(take(buf, at)?) as usize;
        let start = i64::from_le_bytes(take(buf, at + 4)?);
        let len = u64::from_le_bytes(take(buf, at + 12)?) as usize;
        let offset = u64::from_le_bytes(take(buf, at + 20)?) as usize;
        let sigma_nc2 = f64::from_le_bytes(take(buf, at + 28)?);
        let end = len
            .checked_mul(16)
            .and_then(|n| n.checked_add(offset))
            .filter(|&e| e <= buf.len())
            .ok_or_else(|| IsarError::Format(format!("frame {m} exceeds the file")))?;
        let y = buf[offset..end]
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        frames.push(FrameSamples { m, start, y, sigma_nc2 });
    }
    Ok(frames)
}

/// `m,k,re,im` rows with `k` the in-frame sample index.
pub fn frames_to_csv(frames: &[FrameSamples]) -> String {
    let mut s = String::from("m,k,re,im\n");
    for f in frames {
        for (i, v) in f.y.iter().enumerate() {
            let _ = writeln!(s, "{},{},{},{}", f.m, f.start + i as i64, v.re, v.im);
        }
    }
    s
}

/// Inverse of [`frames_to_csv`]. The format carries no noise level, so
/// `sigma_nc2` is supplied by the caller.
pub fn frames_from_csv(text: &str, sigma_nc2: f64) -> Result<Vec<FrameSamples>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut frames: Vec<FrameSamples> = Vec::new();
    for (line, rec) in reader.deserialize::<(usize, i64, f64, f64)>().enumerate() {
        let (m, k, re, im) = rec.map_err(|e| IsarError::Format(format!("csv row {}: {e}", line + 1)))?;
        match frames.last_mut() {
            Some(f) if f.m == m => {
                if k != f.end() {
                    return Err(IsarError::Format(format!("frame {m}: sample {k} out of order")));
                }
                f.y.push(Complex64::new(re, im));
            }
            _ => frames.push(FrameSamples { m, start: k, y: vec![Complex64::new(re, im)], sigma_nc2 }),
        }
    }
    Ok(frames)
}

pub fn preamble_csv(pre: &Preamble) -> String {
    let mut s = String::from("sample\n");
    for v in &pre.samples {
        let _ = writeln!(s, "{v}");
    }
    s
}

/// `estimates.json`; field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub delays: Vec<i64>,
    pub h_hat: Vec<[f64; 2]>,
    pub doppler_corrected: Vec<Vec<f64>>,
    pub delta_med: f64,
    #[serde(rename = "V_hat")]
    pub v_hat: f64,
    #[serde(rename = "N_hat_p")]
    pub n_hat_p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxesFile {
    pub delta_r: f64,
    pub delta_cr: f64,
    pub n_r: usize,
    pub n_cr: usize,
    pub flipped: bool,
}

pub fn axes(img: &IsarImage) -> AxesFile {
    AxesFile {
        delta_r: img.delta_r,
        delta_cr: img.delta_cr,
        n_r: img.n_r(),
        n_cr: img.n_cr(),
        flipped: img.flipped,
    }
}

/// Binary 16-bit PGM, rows are range bins, max-normalized to 65535.
pub fn image_pgm(img: &IsarImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", img.n_cr(), img.n_r());
    let mut out = header.into_bytes();
    let max = img.max_value();
    for v in img.grid.iter().flatten() {
        let q = if max > 0.0 { (v / max * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn image_csv(img: &IsarImage) -> String {
    let mut s = String::new();
    for row in &img.grid {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}
