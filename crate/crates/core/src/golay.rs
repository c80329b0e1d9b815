//! Golay complementary pairs and the SC PHY training field.
//!
//! All indices are 0-based. The exploited correlation segment starts at
//! sample 2048 of the training field.

use std::ops::Range;

use num_complex::Complex64;

use crate::error::{IsarError, Result};

pub const STF_LEN: usize = 2176;
pub const CEF_LEN: usize = 1152;
pub const PREAMBLE_LEN: usize = STF_LEN + CEF_LEN;
/// Start of the `[-a, -b, -a, b]` segment used for delay estimation.
pub const S512_OFFSET: usize = 2048;
pub const S512_LEN: usize = 512;

/// Delay vector of the 802.11ad 128-sample pair.
pub const AD_DELAYS: [usize; 7] = [1, 8, 2, 4, 16, 32, 64];
/// Weight vector of the 802.11ad 128-sample pair.
pub const AD_WEIGHTS: [i8; 7] = [-1, -1, -1, -1, 1, -1, -1];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GolayPair {
    pub a: Vec<i8>,
    pub b: Vec<i8>,
}

impl GolayPair {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Time-reversed pair. Reversal preserves complementarity.
    pub fn reversed(&self) -> GolayPair {
        GolayPair {
            a: self.a.iter().rev().copied().collect(),
            b: self.b.iter().rev().copied().collect(),
        }
    }

    /// `R_a[k] + R_b[k]` for `k = 0..N`.
    pub fn autocorr_sum(&self) -> Vec<i64> {
        let ra = aperiodic_autocorr(&self.a);
        let rb = aperiodic_autocorr(&self.b);
        ra.iter().zip(&rb).map(|(x, y)| x + y).collect()
    }
}

/// Aperiodic autocorrelation `R[k] = sum_n x[n] x[n+k]` for `k = 0..N`.
/// Negative lags follow by symmetry.
pub fn aperiodic_autocorr(x: &[i8]) -> Vec<i64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x[..n - k]
                .iter()
                .zip(&x[k..])
                .map(|(&u, &v)| i64::from(u) * i64::from(v))
                .sum()
        })
        .collect()
}

/// Recursive delay/weight construction:
/// `A_k(n) = W_k A_{k-1}(n) + B_{k-1}(n - D_k)`,
/// `B_k(n) = W_k A_{k-1}(n) - B_{k-1}(n - D_k)`, starting from unit impulses.
pub fn generate_golay_pair(n: usize, delays: &[usize], weights: &[i8]) -> Result<GolayPair> {
    if n < 2 || !n.is_power_of_two() {
        return Err(IsarError::Golay(format!("length {n} is not a power of two >= 2")));
    }
    let levels = n.trailing_zeros() as usize;
    if delays.len() != levels || weights.len() != levels {
        return Err(IsarError::Golay(format!(
            "length {n} needs {levels} delays and weights, got {} and {}",
            delays.len(),
            weights.len()
        )));
    }
    let mut seen = 0usize;
    for &d in delays {
        if d == 0 || !d.is_power_of_two() || d >= n {
            return Err(IsarError::Golay(format!("delay {d} is not a power of two below {n}")));
        }
        if seen & d != 0 {
            return Err(IsarError::Golay(format!("duplicate delay {d}")));
        }
        seen |= d;
    }
    if let Some(w) = weights.iter().find(|&&w| w != 1 && w != -1) {
        return Err(IsarError::Golay(format!("weight {w} is not +1 or -1")));
    }

    let mut a = vec![0i8; n];
    let mut b = vec![0i8; n];
    a[0] = 1;
    b[0] = 1;
    for (&d, &w) in delays.iter().zip(weights) {
        let mut na = vec![0i8; n];
        let mut nb = vec![0i8; n];
        for i in 0..n {
            let shifted = if i >= d { b[i - d] } else { 0 };
            na[i] = w * a[i] + shifted;
            nb[i] = w * a[i] - shifted;
        }
        a = na;
        b = nb;
    }
    Ok(GolayPair { a, b })
}

/// The 802.11ad Ga128/Gb128 pair.
///
/// The standard lists the sequences in transmission order, which is the
/// time reverse of the recursion output.
pub fn ieee80211ad_pair() -> GolayPair {
    generate_golay_pair(128, &AD_DELAYS, &AD_WEIGHTS)
        .expect("802.11ad parameters are valid")
        .reversed()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preamble {
    pub samples: Vec<i8>,
}

impl Preamble {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn s512(&self) -> &[i8] {
        &self.samples[S512_OFFSET..S512_OFFSET + S512_LEN]
    }

    /// Sample `s[i]`, zero outside `[0, K)`.
    pub fn at(&self, i: isize) -> i8 {
        if i < 0 {
            0
        } else {
            self.samples.get(i as usize).copied().unwrap_or(0)
        }
    }
}

/// STF (16 x a, then -a) followed by the CEF (Gu, Gv, then -b).
pub fn assemble_preamble(pair: &GolayPair) -> Result<Preamble> {
    if pair.len() != 128 || pair.b.len() != 128 {
        return Err(IsarError::Golay(format!(
            "preamble needs a 128-sample pair, got {}",
            pair.len()
        )));
    }
    let a = &pair.a;
    let b = &pair.b;
    let neg = |x: &[i8]| x.iter().map(|v| -v).collect::<Vec<i8>>();
    let na = neg(a);
    let nb = neg(b);

    let mut s = Vec::with_capacity(PREAMBLE_LEN);
    for _ in 0..16 {
        s.extend_from_slice(a);
    }
    s.extend_from_slice(&na);
    // Gu = [-b, -a, b, -a], Gv = [-b, a, -b, -a]
    for block in [&nb, &na, b, &na, &nb, a, &nb, &na, &nb] {
        s.extend_from_slice(block);
    }
    debug_assert_eq!(s.len(), PREAMBLE_LEN);
    Ok(Preamble { samples: s })
}

/// `R[l] = sum_k s512[k] conj(y[l + k])` for each `l` in `lags`.
///
/// `lags` indexes `y` directly.
pub fn xcorr_s512(s512: &[i8], y: &[Complex64], lags: Range<usize>) -> Result<Vec<Complex64>> {
    if s512.len() != S512_LEN {
        return Err(IsarError::InvalidArgument(format!(
            "s512 must have 512 samples, got {}",
            s512.len()
        )));
    }
    if lags.is_empty() {
        return Ok(Vec::new());
    }
    if lags.end - 1 + S512_LEN > y.len() {
        return Err(IsarError::InvalidArgument(format!(
            "lag {} needs {} samples, only {} available",
            lags.end - 1,
            lags.end - 1 + S512_LEN,
            y.len()
        )));
    }
    Ok(lags
        .map(|l| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&s, v) in s512.iter().zip(&y[l..l + S512_LEN]) {
                let s = f64::from(s);
                acc.re += s * v.re;
                acc.im -= s * v.im;
            }
            acc
        })
        .collect())
}
