//! Monte Carlo limit law of the least-squares coefficients under long-memory noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GmwmxError, Result};

/// Probabilities of the tabulated quantiles.
pub const QUANTILE_PROBS: [f64; 5] = [0.025, 0.05, 0.5, 0.95, 0.975];

/// Exact sampler of fractional Brownian motion increments on the grid `k/m`, `k < m`.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    chol: DMatrix<f64>,
}

impl FbmSampler {
    /// Standard fBM (`Var B(1) = 1`) with Hurst index `hurst ∈ (0, 1)` on `m` steps.
    pub fn new(hurst: f64, m: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) || m == 0 {
            return Err(GmwmxError::InvalidParameter(format!("Hurst index {hurst} on {m} steps")));
        }
        let h2 = 2.0 * hurst;
        let scale = (m as f64).powf(-h2);
        let gamma = |k: usize| {
            let k = k as f64;
            0.5 * scale * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
        };
        let cov = DMatrix::from_fn(m, m, |a, b| gamma(a.abs_diff(b)));
        let chol = cov.cholesky().ok_or(GmwmxError::FactorizationFailure { step: 0 })?;
        Ok(FbmSampler { chol: chol.l() })
    }

    pub fn steps(&self) -> usize {
        self.chol.nrows()
    }

    /// One draw of the `m` increments `B((k+1)/m) - B(k/m)`.
    pub fn increments<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let m = self.steps();
        let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.chol * z
    }
}

/// Per-coefficient Monte Carlo summary of the limit `μ⁻¹ C⁻¹ ∫ G(u) dB^d(u)`.
#[derive(Debug, Clone)]
pub struct LongMemoryTable {
    pub d: f64,
    pub reps: usize,
    /// `quantiles[i][k]` is the `QUANTILE_PROBS[k]` quantile for coefficient `i`.
    pub quantiles: Vec<[f64; 5]>,
    pub std_dev: Vec<f64>,
    /// Quantiles of the statistic divided by its Monte Carlo standard deviation.
    pub standardized: Vec<[f64; 5]>,
}

/// Draws `reps` replicates of the limit `μ⁻¹ C⁻¹ ∫ G(u) dB^d(u)`, returned per coefficient.
///
/// `C` is the correlation-normalized `XᵀX` and `G_i(j/n) = X_{j,i} / sqrt(n⁻¹ Σ_l X_{l,i}²)`;
/// the stochastic integral is a left-point Riemann–Stieltjes sum on `grid` steps.
pub fn simulate_limit(x: &DMatrix<f64>, d: f64, mu: f64, grid: usize, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(d > 0.0 && d < 0.5) {
        return Err(GmwmxError::InvalidParameter(format!("memory parameter must lie in (0, 1/2), got {d}")));
    }
    if reps < 2 {
        return Err(GmwmxError::InvalidParameter("at least two replicates are needed".into()));
    }
    let (n, p) = x.shape();
    let rms: Vec<f64> = (0..p).map(|c| (x.column(c).norm_squared() / n as f64).sqrt()).collect();
    if rms.contains(&0.0) {
        return Err(GmwmxError::RankDeficientDesign);
    }
    let c = DMatrix::from_fn(p, p, |a, b| x.column(a).dot(&x.column(b)) / (n as f64 * rms[a] * rms[b]));
    let c_inv = c.try_inverse().ok_or(GmwmxError::RankDeficientDesign)?;
    let m = grid.max(1);
    let g = DMatrix::from_fn(p, m, |i, k| x[((k * n) / m, i)] / rms[i]);
    let proj = c_inv * g / mu;
    let sampler = FbmSampler::new(d + 0.5, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); p];
    for _ in 0..reps {
        let z = &proj * sampler.increments(&mut rng);
        for (col, v) in draws.iter_mut().zip(z.iter()) {
            col.push(*v);
        }
    }
    Ok(draws)
}

/// Simulates the long-memory limit law for design `x`, memory parameter `d ∈ (0, 1/2)`
/// and mean observation rate `mu`, and tabulates it per coefficient.
pub fn long_memory_quantiles(
    x: &DMatrix<f64>,
    d: f64,
    mu: f64,
    grid: usize,
    reps: usize,
    seed: u64,
) -> Result<LongMemoryTable> {
    let mut draws = simulate_limit(x, d, mu, grid, reps, seed)?;
    let p = draws.len();
    let mut quantiles = Vec::with_capacity(p);
    let mut std_dev = Vec::with_capacity(p);
    let mut standardized = Vec::with_capacity(p);
    for col in &mut draws {
        let mean = col.iter().sum::<f64>() / reps as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        col.sort_by(f64::total_cmp);
        let q = QUANTILE_PROBS.map(|pr| empirical_quantile(col, pr));
        quantiles.push(q);
        standardized.push(q.map(|v| if sd > 0.0 { v / sd } else { 0.0 }));
        std_dev.push(sd);
    }
    Ok(LongMemoryTable { d, reps, quantiles, std_dev, standardized })
}

/// Linear-interpolation quantile of sorted data.
pub fn empirical_quantile(sorted: &[f64], prob: f64) -> f64 {
    let pos = prob.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
