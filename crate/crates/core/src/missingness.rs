//! Two-state Markov model for the observation mask.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GmwmxError, Result};

const CLAMP: f64 = 1e-6;

/// Markov chain on the mask `Z_i` (1 observed, 0 missing) with `p1 = P(1 -> 0)`
/// and `p2 = P(0 -> 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissingnessModel {
    pub p1: f64,
    pub p2: f64,
}

impl MissingnessModel {
    /// Fully observed data.
    pub const COMPLETE: MissingnessModel = MissingnessModel { p1: 0.0, p2: 1.0 };

    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
            return Err(GmwmxError::InvalidParameter(format!(
                "transition probabilities must lie in [0, 1], got ({p1}, {p2})"
            )));
        }
        if p1 == 0.0 && p2 == 0.0 {
            return Err(GmwmxError::DegenerateChain);
        }
        Ok(MissingnessModel { p1, p2 })
    }

    /// Builds the chain from the stationary mean `mu = E[Z]` and `rho = P(Z_i = Z_{i+1})`.
    pub fn from_mean_and_persistence(mu: f64, rho: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(GmwmxError::InvalidParameter(format!("mean must lie in (0, 1), got {mu}")));
        }
        let p1 = (1.0 - rho) / (2.0 * mu);
        let p2 = (1.0 - rho) / (2.0 * (1.0 - mu));
        MissingnessModel::new(p1, p2)
    }

    /// Stationary probability of observing an epoch.
    pub fn mu(&self) -> f64 {
        if self.p1 == 0.0 {
            1.0
        } else {
            self.p2 / (self.p1 + self.p2)
        }
    }

    /// Stationary probability that consecutive mask entries agree.
    pub fn persistence(&self) -> f64 {
        let mu = self.mu();
        (1.0 - self.p1) * mu + (1.0 - self.p2) * (1.0 - mu)
    }

    /// Lag-one autocorrelation of the chain, `1 - p1 - p2`.
    pub fn decay(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }

    /// Mask autocovariance `Λ_k = mu (1 - mu) (1 - p1 - p2)^k` for `k < n`.
    pub fn mask_autocovariance(&self, n: usize) -> Vec<f64> {
        let mu = self.mu();
        let r = self.decay();
        let mut out = Vec::with_capacity(n);
        let mut v = mu * (1.0 - mu);
        for _ in 0..n {
            out.push(v);
            v *= r;
        }
        out
    }

    /// Second moment of the mask, `E[Z_i Z_{i+k}] = Λ_k + mu^2`, for `k < n`.
    pub fn mask_second_moment(&self, n: usize) -> Vec<f64> {
        let mu2 = self.mu().powi(2);
        self.mask_autocovariance(n).into_iter().map(|l| l + mu2).collect()
    }

    /// Transition-frequency estimator, clamped to `[1e-6, 1 - 1e-6]` unless the mask is
    /// fully observed.
    pub fn estimate(mask: &[u8]) -> Result<Self> {
        if mask.is_empty() || mask.iter().all(|&z| z == 0) {
            return Err(GmwmxError::AllMissing);
        }
        if mask.iter().all(|&z| z != 0) {
            return Ok(MissingnessModel::COMPLETE);
        }
        let (mut n10, mut n1, mut n01, mut n0) = (0usize, 0usize, 0usize, 0usize);
        for w in mask.windows(2) {
            let (a, b) = (w[0] != 0, w[1] != 0);
            if a {
                n1 += 1;
                if !b {
                    n10 += 1;
                }
            } else {
                n0 += 1;
                if b {
                    n01 += 1;
                }
            }
        }
        let clamp = |v: f64| v.clamp(CLAMP, 1.0 - CLAMP);
        let p1 = if n1 == 0 { clamp(1.0) } else { clamp(n10 as f64 / n1 as f64) };
        let p2 = if n0 == 0 { clamp(1.0) } else { clamp(n01 as f64 / n0 as f64) };
        Ok(MissingnessModel { p1, p2 })
    }

    /// Simulates a mask of length `n` started from the stationary distribution.
    pub fn simulate(&self, n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.simulate_with(n, &mut rng)
    }

    pub fn simulate_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<u8> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let mut z = rng.random::<f64>() < self.mu();
        out.push(z as u8);
        for _ in 1..n {
            let u: f64 = rng.random();
            z = if z { u >= self.p1 } else { u < self.p2 };
            out.push(z as u8);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_data_has_unit_mean() {
        let m = MissingnessModel::COMPLETE;
        assert_eq!(m.mu(), 1.0);
        assert!(m.mask_autocovariance(4).iter().all(|&v| v == 0.0));
        assert_eq!(MissingnessModel::estimate(&[1, 1, 1]).unwrap(), m);
    }

    #[test]
    fn degenerate_and_empty_inputs() {
        assert!(matches!(MissingnessModel::new(0.0, 0.0), Err(GmwmxError::DegenerateChain)));
        assert!(matches!(MissingnessModel::estimate(&[0, 0]), Err(GmwmxError::AllMissing)));
        // No observed-to-observed transition is ever seen from state 0 here.
        let m = MissingnessModel::estimate(&[1, 1, 1, 0]).unwrap();
        assert!((m.p2 - (1.0 - 1e-6)).abs() < 1e-15);
        assert!((m.p1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn persistence_round_trip() {
        let m = MissingnessModel::new(0.05, 0.2).unwrap();
        let back = MissingnessModel::from_mean_and_persistence(m.mu(), m.persistence()).unwrap();
        assert!((back.p1 - 0.05).abs() < 1e-14 && (back.p2 - 0.2).abs() < 1e-14);
    }
}
