//! Covariance matrix of the empirical Haar wavelet variance under Gaussianity.

use nalgebra::DMatrix;

use crate::error::{GmwmxError, Result};
use crate::noise::{CovarianceMode, CovarianceSummary, NoiseModel};
use crate::theo_wv::averaging_matrix;
use crate::wavelet::{filter_len, max_scales, n_coefficients};

/// Default largest `n` for the exact dense recursion on non-stationary models.
pub const WV_COV_CAP: usize = 2048;

/// Relative ridge added before inverting the wavelet variance covariance.
pub const RIDGE: f64 = 1e-10;

fn check_scales(n: usize, scales: usize) -> Result<()> {
    let max = max_scales(n);
    if scales == 0 || scales > max {
        return Err(GmwmxError::ScaleBudgetExceeded { scales, n, max });
    }
    Ok(())
}

/// Autocovariance `f_j(h)` of the scale-`j` wavelet coefficients at lags `0..=max_lag`
/// for `j = 1..=scales`, given the process autocovariance `seq` (zero beyond its end).
pub fn coefficient_autocovariance(seq: &[f64], scales: usize, max_lag: usize) -> Vec<Vec<f64>> {
    let rho = |k: i64| -> f64 { seq.get(k.unsigned_abs() as usize).copied().unwrap_or(0.0) };
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(scales);
    // Level j needs lags up to max_lag + Σ_{i=j}^{scales-1} 2^i.
    let ext = |j: usize| max_lag + (filter_len(scales) - filter_len(j));
    let f1: Vec<f64> = (0..=ext(1) as i64).map(|h| 0.5 * rho(h) - 0.25 * rho(h - 1) - 0.25 * rho(h + 1)).collect();
    out.push(f1);
    for j in 1..scales {
        let prev = &out[j - 1];
        let m = (filter_len(j) / 2) as i64;
        let f = |h: i64| prev[h.unsigned_abs() as usize];
        let next: Vec<f64> = (0..=ext(j + 1) as i64)
            .map(|h| 1.5 * f(h) + (f(h - m) + f(h + m)) + 0.25 * (f(h - 2 * m) + f(h + 2 * m)))
            .collect();
        out.push(next);
    }
    for (j, f) in out.iter_mut().enumerate() {
        f.truncate(ext(j + 1).min(max_lag) + 1);
    }
    out
}

/// `g(i) = 2^-l Σ_p c_p f(i + p m)` for `i` in `[lo, hi]`, with triangular weights
/// `c_p = min(p + 1, 2^(l+1) - 1 - p)`, computed as two running box sums of width `2^l`.
fn triangular_filter(f: &dyn Fn(i64) -> f64, lo: i64, hi: i64, m: i64, l: usize) -> Vec<f64> {
    let w = 1i64 << l;
    // Box sums B(i) = Σ_{r<w} f(i + r m) over [lo, hi + (w-1) m].
    let b_hi = hi + (w - 1) * m;
    let len = (b_hi - lo + 1) as usize;
    let mut b = vec![0.0; len];
    for i in lo..=b_hi {
        let idx = (i - lo) as usize;
        b[idx] = if idx < m as usize {
            (0..w).map(|r| f(i + r * m)).sum()
        } else {
            b[idx - m as usize] - f(i - m) + f(i + (w - 1) * m)
        };
    }
    let norm = 1.0 / (1u64 << l) as f64;
    let mut g = vec![0.0; (hi - lo + 1) as usize];
    for i in lo..=hi {
        let idx = (i - lo) as usize;
        g[idx] = if idx < m as usize {
            (0..w).map(|q| b[idx + (q * m) as usize]).sum()
        } else {
            g[idx - m as usize] - b[idx - m as usize] + b[idx + ((w - 1) * m) as usize]
        };
    }
    g.iter_mut().for_each(|v| *v *= norm);
    g
}

/// Wavelet variance covariance from a Toeplitz autocovariance via the scale recursion.
///
/// `seq` must cover lags `0..n`.
pub fn wv_cov_from_seq(seq: &[f64], n: usize, scales: usize) -> Result<DMatrix<f64>> {
    check_scales(n, scales)?;
    if seq.len() < n {
        return Err(GmwmxError::InsufficientLags { have: seq.len(), need: n });
    }
    let f = coefficient_autocovariance(&seq[..n], scales, n);
    let mut v = DMatrix::<f64>::zeros(scales, scales);
    for j in 1..=scales {
        let mj = n_coefficients(n, j);
        let fj = &f[j - 1];
        let var: f64 = (1..mj).map(|i| 2.0 * (mj - i) as f64 * fj[i] * fj[i]).sum::<f64>() + mj as f64 * fj[0] * fj[0];
        v[(j - 1, j - 1)] = 2.0 * var / (mj * mj) as f64;
        let fa = |h: i64| fj[h.unsigned_abs() as usize];
        let m = (filter_len(j) / 2) as i64;
        for k in j + 1..=scales {
            let mk = n_coefficients(n, k);
            let l = k - j;
            let lo = -(mj as i64 - 1);
            let hi = mk as i64 - 1;
            let g = triangular_filter(&fa, lo, hi, m, l);
            let mut acc = 0.0;
            for (idx, gi) in g.iter().enumerate() {
                let i = lo + idx as i64;
                let count = if i > 0 {
                    mk as i64 - i
                } else if i >= -((mj - mk) as i64) {
                    mk as i64
                } else {
                    mj as i64 + i
                };
                acc += count as f64 * gi * gi;
            }
            let c = 2.0 * acc / (mj * mk) as f64;
            v[(j - 1, k - 1)] = c;
            v[(k - 1, j - 1)] = c;
        }
    }
    Ok(v)
}

/// Scale recursion for a stationary summary.
pub fn wv_cov_recursive_stationary(summary: &CovarianceSummary, n: usize, scales: usize) -> Result<DMatrix<f64>> {
    if summary.mode != CovarianceMode::Stationary {
        return Err(GmwmxError::NonStationaryComponentPresent);
    }
    wv_cov_from_seq(&summary.seq, n, scales)
}

/// Exact wavelet variance covariance for an arbitrary dense covariance `sigma`.
///
/// Propagates the coefficient covariance matrix from one scale to the next and forms every
/// cross-scale block from the finer of the two scales.
pub fn wv_cov_dense(sigma: &DMatrix<f64>, scales: usize) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    check_scales(n, scales)?;
    let m1 = n - 1;
    let mut s = DMatrix::<f64>::from_fn(m1, m1, |a, b| {
        0.25 * (sigma[(a, b)] - sigma[(a, b + 1)] - sigma[(a + 1, b)] + sigma[(a + 1, b + 1)])
    });
    let mut v = DMatrix::<f64>::zeros(scales, scales);
    for j in 1..=scales {
        let mj = n_coefficients(n, j);
        debug_assert_eq!(s.nrows(), mj);
        v[(j - 1, j - 1)] = 2.0 * s.norm_squared() / (mj * mj) as f64;
        let m = (filter_len(j) / 2) as i64;
        for k in j + 1..=scales {
            let mk = n_coefficients(n, k);
            let mut acc = 0.0;
            for col in 0..mj {
                let f = |i: i64| s[(i as usize, col)];
                let g = triangular_filter(&f, 0, mk as i64 - 1, m, k - j);
                acc += g.iter().map(|x| x * x).sum::<f64>();
            }
            let c = 2.0 * acc / (mj * mk) as f64;
            v[(j - 1, k - 1)] = c;
            v[(k - 1, j - 1)] = c;
        }
        if j < scales {
            let mn = n_coefficients(n, j + 1);
            let m = m as usize;
            let rows =
                DMatrix::<f64>::from_fn(mn, mj, |a, b| 0.5 * s[(a, b)] + s[(a + m, b)] + 0.5 * s[(a + 2 * m, b)]);
            s = DMatrix::<f64>::from_fn(mn, mn, |a, b| {
                0.5 * rows[(a, b)] + rows[(a, b + m)] + 0.5 * rows[(a, b + 2 * m)]
            });
        }
    }
    Ok(v)
}

/// Wavelet variance covariance for a model containing a non-stationary component.
///
/// Exact (dense) up to `cap`; above it the Toeplitz recursion is applied to the diagonal
/// averages, which is an approximation.
pub fn wv_cov_recursive_nonstationary(model: &NoiseModel, n: usize, scales: usize, cap: usize) -> Result<DMatrix<f64>> {
    check_scales(n, scales)?;
    if n <= cap {
        wv_cov_dense(&model.dense_covariance(n), scales)
    } else {
        wv_cov_from_seq(&model.summary(n, n, 0).seq, n, scales)
    }
}

/// Wavelet variance covariance of a model, dispatching on stationarity.
pub fn wv_covariance(model: &NoiseModel, n: usize, scales: usize, cap: usize) -> Result<DMatrix<f64>> {
    if model.is_stationary() {
        wv_cov_from_seq(&model.autocovariance(n)?.seq, n, scales)
    } else {
        wv_cov_recursive_nonstationary(model, n, scales, cap)
    }
}

/// Dense trace oracle `v_jl = 2 tr(A_j Σ A_l Σ)`.
pub fn wv_cov_trace(sigma: &DMatrix<f64>, scales: usize) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    check_scales(n, scales)?;
    let b: Vec<DMatrix<f64>> = (1..=scales).map(|j| averaging_matrix(n, j) * sigma).collect();
    let mut v = DMatrix::<f64>::zeros(scales, scales);
    for j in 0..scales {
        for l in j..scales {
            // tr(B_j B_l) = Σ_{rc} B_j[r,c] B_l[c,r].
            let t = b[j].component_mul(&b[l].transpose()).sum();
            v[(j, l)] = 2.0 * t;
            v[(l, j)] = 2.0 * t;
        }
    }
    Ok(v)
}

/// `(V + 1e-10 tr(V)/J I)^-1`.
pub fn ridge_inverse(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let j = v.nrows();
    let ridge = RIDGE * v.trace() / j as f64;
    let mut a = v.clone();
    for i in 0..j {
        a[(i, i)] += ridge;
    }
    match a.clone().cholesky() {
        Some(c) => Ok(c.inverse()),
        None => a.try_inverse().ok_or(GmwmxError::FactorizationFailure { step: 0 }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_four_coefficients() {
        let mut seq = vec![0.0; 5];
        seq[0] = 1.0;
        let v = wv_cov_from_seq(&seq, 5, 1).unwrap();
        assert!((v[(0, 0)] - 0.171875).abs() < 1e-15);
    }

    #[test]
    fn triangular_filter_matches_direct_sum() {
        let vals: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.61).cos()).collect();
        let f = |h: i64| vals[(h + 100) as usize];
        for l in 1..3 {
            let m = 3;
            let g = triangular_filter(&f, -40, 20, m, l);
            let w = 1i64 << l;
            for (idx, gi) in g.iter().enumerate() {
                let i = -40 + idx as i64;
                let direct: f64 =
                    (0..2 * w - 1).map(|p| (p + 1).min(2 * w - 1 - p) as f64 * f(i + p * m)).sum::<f64>() / w as f64;
                assert!((gi - direct).abs() < 1e-13);
            }
        }
    }
}
