//! Theoretical Haar wavelet variance from a covariance summary, with the missingness
//! and residual adjustments used by the estimator.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{GmwmxError, Result};
use crate::fft;
use crate::missingness::MissingnessModel;
use crate::noise::{CovarianceSummary, NoiseModel};
use crate::wavelet::{filter_len, max_scales, n_coefficients};

/// Default largest `n` accepted by the dense trace oracle.
pub const TRACE_CAP: usize = 4096;

/// Lag weights `w_k = (2 - [k = 0]) Σ_a h_a h_{a+k}` of the Haar filter at scale `j`, `k < 2^j`,
/// so that a Toeplitz covariance `r` has wavelet variance `Σ_k w_k r_k`.
pub fn haar_lag_weights(j: usize) -> Vec<f64> {
    let l = filter_len(j);
    let m = (l / 2) as f64;
    let norm = 1.0 / (l * l) as f64;
    (0..l)
        .map(|k| {
            let kf = k as f64;
            let r = if kf <= m { 2.0 * m - 3.0 * kf } else { -(2.0 * m - kf) };
            let mult = if k == 0 { 1.0 } else { 2.0 };
            mult * r * norm
        })
        .collect()
}

/// Wavelet variance at scales `1..=scales` of a series of length `n`.
///
/// Exact for stationary summaries; for non-stationary ones the edge profile supplies the
/// departure from the Toeplitz value and must cover every requested scale.
pub fn theoretical_wv_fast(summary: &CovarianceSummary, n: usize, scales: usize) -> Result<Vec<f64>> {
    check_scales(n, scales)?;
    let need = filter_len(scales);
    if summary.seq.len() < need {
        return Err(GmwmxError::InsufficientLags { have: summary.seq.len(), need });
    }
    if let Some(e) = &summary.edge {
        if e.len() < scales {
            return Err(GmwmxError::InsufficientLags { have: e.len(), need: scales });
        }
    }
    Ok((1..=scales)
        .map(|j| {
            let w = haar_lag_weights(j);
            let toeplitz: f64 = w.iter().zip(&summary.seq).map(|(a, b)| a * b).sum();
            let edge: f64 = summary.edge.as_ref().map_or(0.0, |e| e[j - 1].iter().sum());
            toeplitz + edge
        })
        .collect())
}

fn check_scales(n: usize, scales: usize) -> Result<()> {
    let max = max_scales(n);
    if scales == 0 || scales > max {
        return Err(GmwmxError::ScaleBudgetExceeded { scales, n, max });
    }
    Ok(())
}

/// Wavelet variance of the observed-and-zero-filled process `Z ⊙ X`.
pub fn missingness_adjusted_wv(
    summary: &CovarianceSummary,
    missingness: &MissingnessModel,
    n: usize,
    scales: usize,
) -> Result<Vec<f64>> {
    let mut s = summary.clone();
    s.scale_lags(&missingness.mask_second_moment(s.seq.len()));
    theoretical_wv_fast(&s, n, scales)
}

/// Explicit averaging matrix `A_j = (1/M_j) Σ_i f_i f_i^T`, where `f_i` is the Haar filter
/// shifted to start at `i`, so that `E[ν̂_j] = tr(A_j Σ)`.
pub fn averaging_matrix(n: usize, j: usize) -> DMatrix<f64> {
    let l = filter_len(j);
    let m = l / 2;
    let mj = n_coefficients(n, j);
    let v2 = 1.0 / ((l * l) as f64 * mj as f64);
    // Integer 2D difference array of the signed outer products, so every entry is an exact
    // count scaled once; running float sums drift by O(n) ulps.
    let mut d = vec![0i64; (n + 1) * (n + 1)];
    let mut rect = |r0: usize, r1: usize, c0: usize, c1: usize, val: i64| {
        d[r0 * (n + 1) + c0] += val;
        d[r0 * (n + 1) + c1] -= val;
        d[r1 * (n + 1) + c0] -= val;
        d[r1 * (n + 1) + c1] += val;
    };
    for i in 0..mj {
        let (a0, a1, b1) = (i, i + m, i + l);
        rect(a0, a1, a0, a1, 1);
        rect(a1, b1, a1, b1, 1);
        rect(a0, a1, a1, b1, -1);
        rect(a1, b1, a0, a1, -1);
    }
    let mut counts = vec![0i64; n * n];
    for r in 0..n {
        let mut row = 0i64;
        for c in 0..n {
            row += d[r * (n + 1) + c];
            counts[r * n + c] = row + if r > 0 { counts[(r - 1) * n + c] } else { 0 };
        }
    }
    DMatrix::from_fn(n, n, |r, c| counts[r * n + c] as f64 * v2)
}

/// `tr(A_j Σ)` for `j = 1..=scales` with a dense covariance.
pub fn trace_wv_dense(sigma: &DMatrix<f64>, scales: usize) -> Result<Vec<f64>> {
    let n = sigma.nrows();
    check_scales(n, scales)?;
    Ok((1..=scales).map(|j| averaging_matrix(n, j).component_mul(sigma).sum()).collect())
}

/// Dense trace oracle: builds `Σ(γ)` and every `A_j` explicitly.
pub fn theoretical_wv_trace(model: &NoiseModel, n: usize, scales: usize, cap: usize) -> Result<Vec<f64>> {
    if n > cap {
        return Err(GmwmxError::OracleSizeExceeded { n, cap });
    }
    check_scales(n, scales)?;
    trace_wv_dense(&model.dense_covariance(n), scales)
}

/// Precomputed kernels for the residual-based correction of a covariance summary.
///
/// With `Q` an orthonormal basis of the design and `q_i` its rows, the kernel at grid lag
/// `l` is `F_l(s) = Σ_{i < n-l} q_i·(q_{i+l+s} + q_{i+l-s})` (one term at `s = 0`), so that
/// the lag-`l` sum of `P Σ` entries is `T_l = Σ_s r_s F_l(s)` for a Toeplitz `Σ`.
#[derive(Debug, Clone)]
pub struct ResidualContext {
    n: usize,
    grid: Vec<usize>,
    kernels: Vec<Vec<f64>>,
}

/// Geometric lag grid with `1 + 3 floor(log2 n)` points from 0 to `n - 1`.
pub fn residual_grid(n: usize) -> Vec<usize> {
    if n <= 1 {
        return vec![0];
    }
    let target = (1 + 3 * max_scales(n)).min(n);
    let mut g = vec![0usize];
    let top = (n - 1) as f64;
    let steps = target.saturating_sub(2).max(1);
    for t in 0..=steps {
        let v = top.powf(t as f64 / steps as f64).round() as usize;
        g.push(v.clamp(1, n - 1));
    }
    g.dedup();
    if *g.last().unwrap() != n - 1 {
        g.push(n - 1);
    }
    g
}

impl ResidualContext {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let q = orthonormal_basis(x)?;
        let grid = residual_grid(n);
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let cols: Vec<Vec<f64>> = (0..q.ncols()).map(|c| q.column(c).iter().copied().collect()).collect();
        let full: Vec<Vec<Complex<f64>>> = cols.iter().map(|c| fft::forward(&mut planner, c, size)).collect();
        let mut kernels = Vec::with_capacity(grid.len());
        for &l in &grid {
            let mut acc = vec![Complex::new(0.0, 0.0); size];
            for (col, fb) in cols.iter().zip(&full) {
                let fa = fft::forward(&mut planner, &col[..n - l], size);
                for ((s, a), b) in acc.iter_mut().zip(&fa).zip(fb) {
                    *s += a.conj() * b;
                }
            }
            // corr[t mod size] = Σ_i a_i b_{i+t}.
            let corr = fft::inverse_real(&mut planner, acc);
            let at = |t: i64| -> f64 {
                if t >= n as i64 || t <= -(n as i64) {
                    0.0
                } else {
                    corr[t.rem_euclid(size as i64) as usize]
                }
            };
            let kernel = (0..n)
                .map(|s| {
                    let (li, si) = (l as i64, s as i64);
                    if s == 0 {
                        at(li)
                    } else {
                        at(li + si) + at(li - si)
                    }
                })
                .collect();
            kernels.push(kernel);
        }
        Ok(ResidualContext { n, grid, kernels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    /// Correction `c_l = -T_l` at the grid lags.
    pub fn grid_correction(&self, seq: &[f64]) -> Result<Vec<f64>> {
        if seq.len() < self.n {
            return Err(GmwmxError::InsufficientLags { have: seq.len(), need: self.n });
        }
        Ok(self.kernels.iter().map(|k| -k.iter().zip(seq).map(|(a, b)| a * b).sum::<f64>()).collect())
    }

    /// Correction at lags `0..len`, linearly interpolated between grid lags.
    pub fn correction(&self, seq: &[f64], len: usize) -> Result<Vec<f64>> {
        let c = self.grid_correction(seq)?;
        Ok(self.interpolate(&c, len))
    }

    /// As [`correction`](Self::correction) for a sequence that is exactly zero beyond its
    /// end, which may be shorter than `n`.
    pub fn correction_zero_tail(&self, seq: &[f64], len: usize) -> Vec<f64> {
        let c: Vec<f64> = self.kernels.iter().map(|k| -k.iter().zip(seq).map(|(a, b)| a * b).sum::<f64>()).collect();
        self.interpolate(&c, len)
    }

    fn interpolate(&self, c: &[f64], len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut seg = 0;
        for l in 0..len.min(self.n) {
            while seg + 1 < self.grid.len() && self.grid[seg + 1] < l {
                seg += 1;
            }
            if seg + 1 >= self.grid.len() {
                out.push(c[seg]);
                continue;
            }
            let (g0, g1) = (self.grid[seg], self.grid[seg + 1]);
            let t = (l - g0) as f64 / (g1 - g0) as f64;
            out.push(c[seg] * (1.0 - t) + c[seg + 1] * t);
        }
        out.resize(len, 0.0);
        out
    }
}

/// Orthonormal basis of the column space of `x` after column equilibration.
pub(crate) fn orthonormal_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if p == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    if p > n {
        return Err(GmwmxError::RankDeficientDesign);
    }
    let mut xs = x.clone();
    for mut c in xs.column_iter_mut() {
        let norm = c.norm();
        if norm == 0.0 {
            return Err(GmwmxError::RankDeficientDesign);
        }
        c /= norm;
    }
    let qr = xs.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= 1e-12 * dmax) {
        return Err(GmwmxError::RankDeficientDesign);
    }
    Ok(qr.q())
}

/// Summary of the residual process `Z ⊙ (I - P) ε`, with lag `l` equal to
/// `(r_l + c_l / (n - l)) (Λ_l + μ²)`; edge profiles are scaled by `Λ_l + μ²` only.
pub fn residual_corrected_summary(
    summary: &CovarianceSummary,
    ctx: &ResidualContext,
    missingness: &MissingnessModel,
    len: usize,
) -> Result<CovarianceSummary> {
    let n = ctx.n();
    let c = ctx.correction(&summary.seq, len)?;
    let mut out = summary.clone();
    out.seq.truncate(len);
    for (l, (a, cl)) in out.seq.iter_mut().zip(&c).enumerate() {
        if l < n {
            *a += cl / (n - l) as f64;
        }
    }
    out.scale_lags(&missingness.mask_second_moment(len));
    Ok(out)
}
