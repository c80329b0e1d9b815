//! Least-squares backscatter coefficients against the shifted-preamble basis.

use nalgebra::linalg::QR;
use nalgebra::{DMatrix, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::delay::DelaySet;
use crate::error::{IsarError, Result};
use crate::frontend::FrameSamples;
use crate::golay::Preamble;

/// Column scale below which a pivot of `R` counts as rank loss.
const RANK_TOL: f64 = 1e-9;

/// `S[a][b] = s[ell_first + a - ell_b]`, zero outside the preamble.
/// Rows span `K + ell_last - ell_first` samples starting at `ell_first`.
pub fn build_symbol_matrix(delays: &DelaySet, preamble: &Preamble) -> DMatrix<f64> {
    let first = delays.first();
    let rows = preamble.len() + (delays.last() - first) as usize;
    DMatrix::from_fn(rows, delays.len(), |a, b| {
        f64::from(preamble.at((first + a as i64 - delays.ells[b]) as isize))
    })
}

/// Shared QR factorization of the symbol matrix, reused for every frame.
pub struct LseSolver {
    qr: QR<f64, Dyn, Dyn>,
    r: DMatrix<f64>,
    first: i64,
    rows: usize,
}

impl LseSolver {
    pub fn new(delays: &DelaySet, preamble: &Preamble) -> Result<Self> {
        if delays.is_empty() {
            return Err(IsarError::InvalidArgument("empty delay set".into()));
        }
        for w in delays.ells.windows(2) {
            if w[0] >= w[1] {
                return Err(IsarError::RankDeficient {
                    first: w[0].max(0) as usize,
                    second: w[1].max(0) as usize,
                });
            }
        }
        let s = build_symbol_matrix(delays, preamble);
        let rows = s.nrows();
        let n = s.ncols();
        if rows < n {
            return Err(IsarError::Dimension(format!("{rows} rows for {n} unknowns")));
        }
        let qr = s.qr();
        let r = qr.r();
        let scale = (preamble.len() as f64).sqrt();
        for j in 0..n {
            if r[(j, j)].abs() < RANK_TOL * scale {
                let prev = if j > 0 { j - 1 } else { j + 1 };
                return Err(IsarError::RankDeficient {
                    first: delays.ells[prev.min(j)] as usize,
                    second: delays.ells[prev.max(j)] as usize,
                });
            }
        }
        Ok(LseSolver {
            qr,
            r,
            first: delays.first(),
            rows,
        })
    }

    /// Samples `y[m, k]` for `k = ell_first .. ell_first + rows`; anything
    /// outside the received window is taken as zero.
    fn observation(&self, frame: &FrameSamples) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.rows, 2);
        for a in 0..self.rows {
            let idx = self.first + a as i64 - frame.start;
            if idx >= 0 {
                if let Some(v) = frame.y.get(idx as usize) {
                    b[(a, 0)] = v.re;
                    b[(a, 1)] = v.im;
                }
            }
        }
        b
    }

    /// Minimizer of `||y - S h||` via `R h = Q^T y`. `S` is real, so the
    /// real and imaginary parts are solved as two right-hand sides.
    pub fn solve(&self, frame: &FrameSamples) -> Vec<Complex64> {
        let mut b = self.observation(frame);
        self.qr.q_tr_mul(&mut b);
        let n = self.r.ncols();
        let top = b.rows(0, n).into_owned();
        let x = self
            .r
            .solve_upper_triangular(&top)
            .expect("pivots checked at construction");
        (0..n).map(|j| Complex64::new(x[(j, 0)], x[(j, 1)])).collect()
    }

    pub fn solve_all(&self, frames: &[FrameSamples]) -> Vec<Vec<Complex64>> {
        frames.par_iter().map(|f| self.solve(f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golay::{assemble_preamble, ieee80211ad_pair};
    use crate::rng::Stream;
    use proptest::prelude::*;

    fn preamble() -> Preamble {
        assemble_preamble(&ieee80211ad_pair()).unwrap()
    }

    fn set(ells: &[i64]) -> DelaySet {
        DelaySet { ells: ells.to_vec(), ell_max_idx: 0 }
    }

    fn synth(s: &DMatrix<f64>, h: &[Complex64], start: i64) -> FrameSamples {
        let y = (0..s.nrows())
            .map(|a| (0..s.ncols()).map(|b| h[b] * s[(a, b)]).sum())
            .collect();
        FrameSamples { m: 0, start, y, sigma_nc2: 0.0 }
    }

    #[test]
    fn single_delay_matrix_is_preamble() {
        let pre = preamble();
        let s = build_symbol_matrix(&set(&[250]), &pre);
        assert_eq!(s.shape(), (3328, 1));
        for (a, &v) in pre.samples.iter().enumerate() {
            assert_eq!(s[(a, 0)], f64::from(v));
        }
    }

    #[test]
    fn adjacent_delays_shift_by_one_row() {
        let pre = preamble();
        let s = build_symbol_matrix(&set(&[250, 251]), &pre);
        assert_eq!(s.nrows(), 3329);
        assert_eq!(s[(0, 1)], 0.0);
        for a in 1..s.nrows() {
            assert_eq!(s[(a, 1)], s[(a - 1, 0)]);
        }
        let gram = s.transpose() * &s;
        assert_eq!(gram[(0, 0)], 3328.0);
        assert_eq!(gram[(1, 1)], 3328.0);
    }

    #[test]
    fn duplicate_delays_name_the_pair() {
        let pre = preamble();
        match LseSolver::new(&set(&[240, 250, 250]), &pre) {
            Err(IsarError::RankDeficient { first, second }) => assert_eq!((first, second), (250, 250)),
            other => panic!("expected rank deficiency, got {:?}", other.err()),
        }
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let pre = preamble();
        let d = set(&[240, 243, 251, 262, 270]);
        let s = build_symbol_matrix(&d, &pre);
        let mut rng = Stream::new(5, 0);
        let y: Vec<Complex64> = (0..s.nrows()).map(|_| rng.complex_normal()).collect();
        let f = FrameSamples { m: 0, start: 240, y: y.clone(), sigma_nc2: 1.0 };
        let h = LseSolver::new(&d, &pre).unwrap().solve(&f);
        let norm_y = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for b in 0..s.ncols() {
            let g: Complex64 = (0..s.nrows())
                .map(|a| {
                    let fit: Complex64 = (0..s.ncols()).map(|c| h[c] * s[(a, c)]).sum();
                    s[(a, b)] * (y[a] - fit)
                })
                .sum();
            assert!(g.norm() < 1e-8 * norm_y, "column {b}: {}", g.norm());
        }
    }

    #[test]
    fn scaling_observation_scales_estimate() {
        let pre = preamble();
        let d = set(&[248, 250]);
        let s = build_symbol_matrix(&d, &pre);
        let h = [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1)];
        let f = synth(&s, &h, 248);
        let alpha = Complex64::new(0.3, -1.7);
        let g = FrameSamples { y: f.y.iter().map(|v| alpha * v).collect(), ..f.clone() };
        let solver = LseSolver::new(&d, &pre).unwrap();
        let a = solver.solve(&f);
        let b = solver.solve(&g);
        for (x, y) in a.iter().zip(&b) {
            assert!((alpha * x - y).norm() < 1e-12 * y.norm().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn exact_model_is_recovered(
            gaps in proptest::collection::vec(1i64..12, 0..10),
            seed in any::<u64>(),
        ) {
            let pre = preamble();
            let mut ells = vec![230i64];
            for g in gaps {
                let next = ells[ells.len() - 1] + g;
                ells.push(next);
            }
            let d = set(&ells);
            let s = build_symbol_matrix(&d, &pre);
            let mut rng = Stream::new(seed, 1);
            let h: Vec<Complex64> = (0..ells.len()).map(|_| rng.complex_normal()).collect();
            let f = synth(&s, &h, 230);
            let est = LseSolver::new(&d, &pre).unwrap().solve(&f);
            for (e, t) in est.iter().zip(&h) {
                prop_assert!((e - t).norm() < 1e-10 * (1.0 + t.norm()));
            }
        }
    }
}
