//! FFT-backed convolution, correlation and Toeplitz products.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Sizes at or below this use direct summation, which is exact in the sense of plain
/// floating-point accumulation.
const DIRECT_CUTOFF: usize = 64;

pub(crate) fn forward(planner: &mut FftPlanner<f64>, x: &[f64], size: usize) -> Vec<Complex<f64>> {
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    planner.plan_fft_forward(size).process(&mut buf);
    buf
}

pub(crate) fn inverse_real(planner: &mut FftPlanner<f64>, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
    let size = buf.len();
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / size as f64;
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// Causal convolution truncated to `n` terms: `out[k] = Σ_{i<=k} h[i] w[k-i]`.
pub fn convolve_truncated(h: &[f64], w: &[f64], n: usize) -> Vec<f64> {
    if n <= DIRECT_CUTOFF {
        return (0..n)
            .map(|k| (0..=k).filter(|&i| i < h.len() && k - i < w.len()).map(|i| h[i] * w[k - i]).sum())
            .collect();
    }
    let size = (h.len().min(n) + w.len().min(n)).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fh = forward(&mut planner, &h[..h.len().min(n)], size);
    let fw = forward(&mut planner, &w[..w.len().min(n)], size);
    let prod = fh.iter().zip(&fw).map(|(a, b)| a * b).collect();
    let mut out = inverse_real(&mut planner, prod);
    out.truncate(n);
    out.resize(n, 0.0);
    out
}

/// Cross-correlation `c(t) = Σ_i a[i] b[i+t]` for `t` in `[-(a.len()-1), b.len()-1]`.
///
/// The result is indexed by `t + a.len() - 1`.
pub fn cross_correlation(a: &[f64], b: &[f64]) -> Vec<f64> {
    let na = a.len();
    let nb = b.len();
    if na == 0 || nb == 0 {
        return Vec::new();
    }
    let len = na + nb - 1;
    if na.min(nb) <= DIRECT_CUTOFF {
        let mut out = vec![0.0; len];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                out[j + na - 1 - i] += ai * bj;
            }
        }
        return out;
    }
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let rev: Vec<f64> = a.iter().rev().copied().collect();
    let fa = forward(&mut planner, &rev, size);
    let fb = forward(&mut planner, b, size);
    let prod = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = inverse_real(&mut planner, prod);
    out.truncate(len);
    out
}

/// Product of the symmetric Toeplitz matrix with first column `col[..n]` and `x` (length `n`).
pub fn toeplitz_matvec(col: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(col.len() >= n, "Toeplitz column shorter than vector");
    if n <= DIRECT_CUTOFF {
        return (0..n).map(|r| (0..n).map(|c| col[r.abs_diff(c)] * x[c]).sum()).collect();
    }
    let size = (2 * n).next_power_of_two();
    let mut circ = vec![0.0; size];
    circ[..n].copy_from_slice(&col[..n]);
    for k in 1..n {
        circ[size - k] = col[k];
    }
    let mut planner = FftPlanner::new();
    let fc = forward(&mut planner, &circ, size);
    let fx = forward(&mut planner, x, size);
    let prod = fc.iter().zip(&fx).map(|(a, b)| a * b).collect();
    let mut out = inverse_real(&mut planner, prod);
    out.truncate(n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize, s: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * s).sin()).collect()
    }

    #[test]
    fn fft_paths_match_direct_sums() {
        let a = seq(150, 0.7);
        let b = seq(210, 1.3);
        let c = cross_correlation(&a, &b);
        for t in -149i64..210 {
            let direct: f64 = (0..150)
                .filter(|&i| (i as i64 + t) >= 0 && ((i as i64 + t) as usize) < 210)
                .map(|i| a[i] * b[(i as i64 + t) as usize])
                .sum();
            assert!((c[(t + 149) as usize] - direct).abs() < 1e-11);
        }
        let conv = convolve_truncated(&a, &b, 180);
        for k in 0..180 {
            let direct: f64 = (0..=k.min(149)).map(|i| a[i] * b[k - i]).sum();
            assert!((conv[k] - direct).abs() < 1e-11);
        }
        let col: Vec<f64> = (0..100).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let x = seq(100, 0.3);
        let y = toeplitz_matvec(&col, &x);
        for r in 0..100usize {
            let direct: f64 = (0..100).map(|c| col[r.abs_diff(c)] * x[c]).sum();
            assert!((y[r] - direct).abs() < 1e-12);
        }
    }
}
