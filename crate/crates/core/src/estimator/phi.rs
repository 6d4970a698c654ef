//! Asymptotic covariance of the least-squares coefficients under latent noise and
//! Markov missingness.

use nalgebra::DMatrix;

use crate::error::{GmwmxError, Result};
use crate::fft::{cross_correlation, toeplitz_matvec};
use crate::missingness::MissingnessModel;
use crate::noise::{power_law_coefficients, NoiseComponent, NoiseModel};

/// Mask autocovariance lags are kept while `|1 - p1 - p2|^k` exceeds this.
const MASK_LAG_CUTOFF: f64 = 1e-15;

/// Thin factorization `X = Q R D` with `D` the column norms and `Q` orthonormal.
#[derive(Debug, Clone)]
pub struct DesignFactor {
    pub q: DMatrix<f64>,
    /// `D⁻¹ R⁻¹`, so that `(XᵀX)⁻¹ Xᵀ = D⁻¹ R⁻¹ Qᵀ`.
    pub coef: DMatrix<f64>,
}

impl DesignFactor {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || p > n {
            return Err(GmwmxError::RankDeficientDesign);
        }
        let mut xs = x.clone();
        let mut norms = vec![0.0; p];
        for (c, mut col) in xs.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(GmwmxError::RankDeficientDesign);
            }
            col /= norm;
            norms[c] = norm;
        }
        let qr = xs.qr();
        let r = qr.r();
        let dmax = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..p).any(|i| r[(i, i)].abs() <= 1e-12 * dmax) {
            return Err(GmwmxError::RankDeficientDesign);
        }
        let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).ok_or(GmwmxError::RankDeficientDesign)?;
        let coef = DMatrix::from_fn(p, p, |a, b| r_inv[(a, b)] / norms[a]);
        Ok(DesignFactor { q: qr.q(), coef })
    }
}

/// `Qᵀ [(Λ + μ² 11ᵀ) ⊙ Σ] Q` for the model covariance `Σ`, without forming `n x n` matrices.
///
/// Stationary components use FFT Toeplitz products with the lag-wise product of
/// autocovariance and mask moment. Flicker uses `Σ = L Lᵀ` with `L` lower-triangular
/// Toeplitz: the `μ²` part is a Gram matrix of `LᵀQ`, and the `Λ` part is summed over the
/// lags where the mask autocovariance is not negligible.
pub fn projected_covariance(
    q: &DMatrix<f64>,
    model: &NoiseModel,
    missingness: &MissingnessModel,
) -> Result<DMatrix<f64>> {
    let (n, p) = q.shape();
    let cols: Vec<Vec<f64>> = (0..p).map(|c| q.column(c).iter().copied().collect()).collect();
    let mu = missingness.mu();
    let mom = missingness.mask_second_moment(n);
    let mut out = DMatrix::<f64>::zeros(p, p);

    let mut stationary = vec![0.0; n];
    let mut any_stationary = false;
    let mut flicker = 0.0;
    for c in &model.components {
        if c.sigma2() == 0.0 {
            continue;
        }
        match c {
            NoiseComponent::Flicker { sigma2 } => flicker += sigma2,
            _ => {
                any_stationary = true;
                for (a, b) in stationary.iter_mut().zip(c.autocovariance(n)?) {
                    *a += b;
                }
            }
        }
    }
    if any_stationary {
        for (a, m) in stationary.iter_mut().zip(&mom) {
            *a *= m;
        }
        let sq: Vec<Vec<f64>> = cols.iter().map(|c| toeplitz_matvec(&stationary, c)).collect();
        for a in 0..p {
            for b in 0..p {
                out[(a, b)] += cols[a].iter().zip(&sq[b]).map(|(x, y)| x * y).sum::<f64>();
            }
        }
    }
    if flicker > 0.0 {
        let h = power_law_coefficients(1.0, n);
        // (LᵀQ)_t = Σ_s h_s q_{t+s}.
        let lq: Vec<Vec<f64>> = cols.iter().map(|c| cross_correlation(&h, c)[n - 1..2 * n - 1].to_vec()).collect();
        for a in 0..p {
            for b in a..p {
                let v = flicker * mu * mu * lq[a].iter().zip(&lq[b]).map(|(x, y)| x * y).sum::<f64>();
                out[(a, b)] += v;
                if a != b {
                    out[(b, a)] += v;
                }
            }
        }
        let lambda = missingness.mask_autocovariance(n);
        let decay = missingness.decay().abs();
        let kmax = if lambda[0] == 0.0 {
            0
        } else if decay == 0.0 {
            1
        } else {
            ((MASK_LAG_CUTOFF.ln() / decay.ln()).ceil() as usize + 1).min(n)
        };
        let mut m = DMatrix::<f64>::zeros(p, p);
        for k in 0..kmax {
            // Σ_{i,i+k} = D_k(i) = Σ_{u<=i} h_u h_{u+k}.
            m.fill(0.0);
            let mut d = 0.0;
            for i in 0..n - k {
                d += h[i] * h[i + k];
                for a in 0..p {
                    let qa = d * cols[a][i];
                    for b in 0..p {
                        m[(a, b)] += qa * cols[b][i + k];
                    }
                }
            }
            let w = flicker * lambda[k];
            if k == 0 {
                out += &m * w;
            } else {
                out += (&m + m.transpose()) * w;
            }
        }
    }
    Ok(out)
}

/// `Φ = μ⁻² (XᵀX)⁻¹ Xᵀ [(Λ + μ² 11ᵀ) ⊙ Σ] X (XᵀX)⁻¹`.
pub fn phi_hat(x: &DMatrix<f64>, model: &NoiseModel, missingness: &MissingnessModel) -> Result<DMatrix<f64>> {
    phi_hat_factored(&DesignFactor::new(x)?, model, missingness)
}

/// [`phi_hat`] with a precomputed design factorization.
pub fn phi_hat_factored(f: &DesignFactor, model: &NoiseModel, missingness: &MissingnessModel) -> Result<DMatrix<f64>> {
    let a = projected_covariance(&f.q, model, missingness)?;
    let mu = missingness.mu();
    let phi = &f.coef * a * f.coef.transpose() / (mu * mu);
    Ok((&phi + phi.transpose()) * 0.5)
}
