//! Haar maximal-overlap wavelet variance.

use crate::error::{GmwmxError, Result};

/// Empirical wavelet variance at scales `1..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct WvSpectrum {
    /// `values[j-1]` is the wavelet variance at scale `j`.
    pub values: Vec<f64>,
    /// `counts[j-1] = n - 2^j + 1` wavelet coefficients per scale.
    pub counts: Vec<usize>,
}

impl WvSpectrum {
    pub fn n_scales(&self) -> usize {
        self.values.len()
    }
}

/// Largest scale whose filter fits in a series of length `n`.
pub fn max_scales(n: usize) -> usize {
    if n < 2 {
        0
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as usize
    }
}

/// Default number of scales, `floor(log2 n) - 1`.
pub fn default_scales(n: usize) -> usize {
    max_scales(n).saturating_sub(1)
}

/// Filter length `2^j`.
pub fn filter_len(j: usize) -> usize {
    1 << j
}

/// Number of coefficients at scale `j`; zero when the filter does not fit.
pub fn n_coefficients(n: usize, j: usize) -> usize {
    (n + 1).saturating_sub(filter_len(j))
}

/// Resolves an optional scale count against the length budget.
pub fn resolve_scales(n: usize, scales: Option<usize>) -> Result<usize> {
    let max = max_scales(n);
    match scales {
        None => {
            let j = default_scales(n);
            if j == 0 {
                Err(GmwmxError::SeriesTooShort { n, needed: 4 })
            } else {
                Ok(j)
            }
        }
        Some(0) => Err(GmwmxError::InvalidParameter("at least one scale is required".into())),
        Some(j) if j > max => Err(GmwmxError::ScaleBudgetExceeded { scales: j, n, max }),
        Some(j) => Ok(j),
    }
}

/// Haar taps at scale `j`: `2^(j-1)` entries `+2^-j` followed by as many `-2^-j`.
pub fn haar_filter(j: usize) -> Vec<f64> {
    let l = filter_len(j);
    let v = 1.0 / l as f64;
    (0..l).map(|i| if i < l / 2 { v } else { -v }).collect()
}

/// Wavelet coefficients at scale `j`: `W_i = Σ_l h_l x_{i+l}` for `i < n - 2^j + 1`.
pub fn wavelet_coefficients(x: &[f64], j: usize) -> Vec<f64> {
    let mut cs = Vec::with_capacity(x.len() + 1);
    cs.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        cs.push(acc);
    }
    coefficients_from_cumsum(&cs, j)
}

fn coefficients_from_cumsum(cs: &[f64], j: usize) -> Vec<f64> {
    let n = cs.len() - 1;
    let l = filter_len(j);
    let m = l / 2;
    let scale = 1.0 / l as f64;
    (0..n_coefficients(n, j)).map(|i| ((cs[i + m] - cs[i]) - (cs[i + l] - cs[i + m])) * scale).collect()
}

/// Empirical Haar wavelet variance of `x` over `scales` scales (default `floor(log2 n) - 1`).
pub fn empirical_wv(x: &[f64], scales: Option<usize>) -> Result<WvSpectrum> {
    let n = x.len();
    let j_max = resolve_scales(n, scales)?;
    // Centring does not change Haar coefficients but keeps the running sums small.
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut cs = Vec::with_capacity(n + 1);
    cs.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v - mean;
        cs.push(acc);
    }
    let mut values = Vec::with_capacity(j_max);
    let mut counts = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let w = coefficients_from_cumsum(&cs, j);
        values.push(w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64);
        counts.push(w.len());
    }
    Ok(WvSpectrum { values, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_budget() {
        assert_eq!(max_scales(1024), 10);
        assert_eq!(max_scales(1023), 9);
        assert_eq!(default_scales(3650), 10);
        assert!(matches!(resolve_scales(8, Some(4)), Err(GmwmxError::ScaleBudgetExceeded { .. })));
        assert!(matches!(resolve_scales(3, None), Err(GmwmxError::SeriesTooShort { .. })));
    }

    #[test]
    fn coefficients_match_direct_filter() {
        let x: Vec<f64> = (0..37).map(|i| ((i * i) as f64 * 0.37).sin() + i as f64).collect();
        for j in 1..=5 {
            let h = haar_filter(j);
            let w = wavelet_coefficients(&x, j);
            assert_eq!(w.len(), 37 - (1 << j) + 1);
            for (i, wi) in w.iter().enumerate() {
                let direct: f64 = h.iter().enumerate().map(|(l, hl)| hl * x[i + l]).sum();
                assert!((wi - direct).abs() < 1e-12);
            }
        }
    }
}
