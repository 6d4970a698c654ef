//! Latent noise components, their covariance summaries and simulation.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GmwmxError, Result};
use crate::fft;
use crate::special::{ln_gamma, matern_correlations};

/// Kind of a noise component, without parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComponentKind {
    WhiteNoise,
    PowerLaw,
    Flicker,
    Matern,
}

impl ComponentKind {
    pub fn n_params(self) -> usize {
        match self {
            ComponentKind::WhiteNoise | ComponentKind::Flicker => 1,
            ComponentKind::PowerLaw => 2,
            ComponentKind::Matern => 3,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ComponentKind::WhiteNoise => "wn",
            ComponentKind::PowerLaw => "pl",
            ComponentKind::Flicker => "fl",
            ComponentKind::Matern => "matern",
        }
    }

    /// Whether the process is stationary (and so has a Toeplitz covariance).
    pub fn is_stationary(self) -> bool {
        self != ComponentKind::Flicker
    }
}

/// One latent noise process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseComponent {
    WhiteNoise {
        sigma2: f64,
    },
    /// Stationary fractionally integrated noise, `-1 < alpha < 1`.
    PowerLaw {
        sigma2: f64,
        alpha: f64,
    },
    /// Non-stationary power law with spectral index 1, started at the first epoch.
    Flicker {
        sigma2: f64,
    },
    /// Matérn process with range `lambda > 0` and smoothness `alpha > 1/2`.
    Matern {
        sigma2: f64,
        lambda: f64,
        alpha: f64,
    },
}

impl NoiseComponent {
    pub fn kind(&self) -> ComponentKind {
        match self {
            NoiseComponent::WhiteNoise { .. } => ComponentKind::WhiteNoise,
            NoiseComponent::PowerLaw { .. } => ComponentKind::PowerLaw,
            NoiseComponent::Flicker { .. } => ComponentKind::Flicker,
            NoiseComponent::Matern { .. } => ComponentKind::Matern,
        }
    }

    pub fn sigma2(&self) -> f64 {
        match *self {
            NoiseComponent::WhiteNoise { sigma2 }
            | NoiseComponent::PowerLaw { sigma2, .. }
            | NoiseComponent::Flicker { sigma2 }
            | NoiseComponent::Matern { sigma2, .. } => sigma2,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            NoiseComponent::WhiteNoise { sigma2 } | NoiseComponent::Flicker { sigma2 } => {
                vec![sigma2]
            }
            NoiseComponent::PowerLaw { sigma2, alpha } => vec![sigma2, alpha],
            NoiseComponent::Matern { sigma2, lambda, alpha } => vec![sigma2, lambda, alpha],
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        match self.kind() {
            ComponentKind::WhiteNoise => vec!["sigma2_wn"],
            ComponentKind::PowerLaw => vec!["sigma2_pl", "alpha_pl"],
            ComponentKind::Flicker => vec!["sigma2_fl"],
            ComponentKind::Matern => vec!["sigma2_matern", "lambda_matern", "alpha_matern"],
        }
    }

    pub fn from_params(kind: ComponentKind, p: &[f64]) -> Result<Self> {
        if p.len() != kind.n_params() {
            return Err(GmwmxError::InvalidParameter(format!(
                "{} takes {} parameters, got {}",
                kind.tag(),
                kind.n_params(),
                p.len()
            )));
        }
        let c = match kind {
            ComponentKind::WhiteNoise => NoiseComponent::WhiteNoise { sigma2: p[0] },
            ComponentKind::PowerLaw => NoiseComponent::PowerLaw { sigma2: p[0], alpha: p[1] },
            ComponentKind::Flicker => NoiseComponent::Flicker { sigma2: p[0] },
            ComponentKind::Matern => NoiseComponent::Matern { sigma2: p[0], lambda: p[1], alpha: p[2] },
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GmwmxError::InvalidParameter(m));
        let s2 = self.sigma2();
        if !(s2.is_finite() && s2 >= 0.0) {
            return bad(format!("variance must be finite and non-negative, got {s2}"));
        }
        match *self {
            NoiseComponent::PowerLaw { alpha, .. } if !(alpha > -1.0 && alpha < 1.0) => {
                bad(format!("power-law index must lie in (-1, 1), got {alpha}"))
            }
            NoiseComponent::Matern { lambda, alpha, .. } => {
                if !(lambda.is_finite() && lambda > 0.0) {
                    bad(format!("Matérn range must be positive, got {lambda}"))
                } else if !(alpha.is_finite() && alpha > 0.5) {
                    bad(format!("Matérn smoothness must exceed 1/2, got {alpha}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Autocovariance at lags `0..n` of a stationary component.
    pub fn autocovariance(&self, n: usize) -> Result<Vec<f64>> {
        match *self {
            NoiseComponent::WhiteNoise { sigma2 } => {
                let mut r = vec![0.0; n];
                if n > 0 {
                    r[0] = sigma2;
                }
                Ok(r)
            }
            NoiseComponent::PowerLaw { sigma2, alpha } => Ok(power_law_autocovariance(sigma2, alpha, n)),
            NoiseComponent::Matern { sigma2, lambda, alpha } => {
                Ok(matern_correlations(alpha - 0.5, lambda, n, 0.0).into_iter().map(|r| sigma2 * r).collect())
            }
            NoiseComponent::Flicker { .. } => Err(GmwmxError::NonStationaryComponentPresent),
        }
    }
}

impl fmt::Display for NoiseComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self.params().iter().map(|v| v.to_string()).collect();
        write!(f, "{}({})", self.kind().tag(), p.join(","))
    }
}

/// Sum of independent latent noise components.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub components: Vec<NoiseComponent>,
}

/// Whether a covariance summary holds a true autocovariance or diagonal averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    Stationary,
    NonStationary,
}

/// Lag-indexed summary of a covariance matrix.
///
/// `seq[k]` is the autocovariance at lag `k` (stationary) or the average of the `k`-th
/// diagonal (non-stationary). For non-stationary covariances `edge[j-1][k]`, `k < 2^j`,
/// holds the exact amount by which the Haar wavelet variance at scale `j` departs from
/// the value implied by treating `seq` as Toeplitz; its sum over `k` is that departure.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSummary {
    pub mode: CovarianceMode,
    pub seq: Vec<f64>,
    pub edge: Option<Vec<Vec<f64>>>,
}

impl CovarianceSummary {
    pub fn zeros(len: usize) -> Self {
        CovarianceSummary { mode: CovarianceMode::Stationary, seq: vec![0.0; len], edge: None }
    }

    /// Adds `c * other` in place; lengths are truncated to the shorter of the two.
    pub fn add_scaled(&mut self, other: &CovarianceSummary, c: f64) {
        let len = self.seq.len().min(other.seq.len());
        self.seq.truncate(len);
        for (a, b) in self.seq.iter_mut().zip(&other.seq) {
            *a += c * b;
        }
        if other.mode == CovarianceMode::NonStationary {
            self.mode = CovarianceMode::NonStationary;
        }
        if let Some(oe) = &other.edge {
            match &mut self.edge {
                None => {
                    self.edge = Some(oe.iter().map(|row| row.iter().map(|v| c * v).collect()).collect());
                }
                Some(se) => {
                    se.truncate(oe.len());
                    for (sr, or) in se.iter_mut().zip(oe) {
                        for (a, b) in sr.iter_mut().zip(or) {
                            *a += c * b;
                        }
                    }
                }
            }
        }
    }

    /// Multiplies lag `k` of both the sequence and the edge profile by `factor[k]`.
    pub fn scale_lags(&mut self, factor: &[f64]) {
        for (a, f) in self.seq.iter_mut().zip(factor) {
            *a *= f;
        }
        if let Some(e) = &mut self.edge {
            for row in e.iter_mut() {
                for (a, f) in row.iter_mut().zip(factor) {
                    *a *= f;
                }
            }
        }
    }
}

impl NoiseModel {
    pub fn new(components: Vec<NoiseComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(GmwmxError::ModelParse("model has no components".into()));
        }
        for c in &components {
            c.validate()?;
        }
        Ok(NoiseModel { components })
    }

    pub fn kinds(&self) -> Vec<ComponentKind> {
        self.components.iter().map(|c| c.kind()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.components.iter().map(|c| c.kind().n_params()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.params()).collect()
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        self.components.iter().flat_map(|c| c.param_names()).collect()
    }

    /// Same component kinds with new parameter values, in `params()` order.
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        if p.len() != self.n_params() {
            return Err(GmwmxError::InvalidParameter(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                p.len()
            )));
        }
        let mut at = 0;
        let mut comps = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let k = c.kind();
            comps.push(NoiseComponent::from_params(k, &p[at..at + k.n_params()])?);
            at += k.n_params();
        }
        Ok(NoiseModel { components: comps })
    }

    pub fn is_stationary(&self) -> bool {
        self.components.iter().all(|c| c.kind().is_stationary())
    }

    /// Autocovariance at lags `0..n`; fails if any component is non-stationary.
    pub fn autocovariance(&self, n: usize) -> Result<CovarianceSummary> {
        let mut seq = vec![0.0; n];
        for c in &self.components {
            for (a, b) in seq.iter_mut().zip(c.autocovariance(n)?) {
                *a += b;
            }
        }
        Ok(CovarianceSummary { mode: CovarianceMode::Stationary, seq, edge: None })
    }

    /// Diagonal averages at lags `0..n` with edge profiles for every scale that fits in `n`.
    pub fn diagonal_averages(&self, n: usize) -> CovarianceSummary {
        self.summary(n, n, crate::wavelet::max_scales(n))
    }

    /// Covariance summary over lags `0..len` for a series of length `n >= len`, with edge
    /// profiles for scales `1..=max_scale` when a non-stationary component is present.
    ///
    /// Lags `k >= n` of non-stationary components are zero.
    pub fn summary(&self, n: usize, len: usize, max_scale: usize) -> CovarianceSummary {
        let mut out = CovarianceSummary::zeros(len);
        for c in &self.components {
            let s2 = c.sigma2();
            match c {
                NoiseComponent::Flicker { .. } => {
                    out.add_scaled(&flicker_unit_summary(n, len, max_scale), s2);
                }
                _ => {
                    let acv = c.autocovariance(len).expect("stationary component");
                    for (a, b) in out.seq.iter_mut().zip(acv) {
                        *a += b;
                    }
                }
            }
        }
        out
    }

    /// Dense `n x n` covariance matrix.
    pub fn dense_covariance(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for c in &self.components {
            match *c {
                NoiseComponent::Flicker { sigma2 } => {
                    let h = power_law_coefficients(1.0, n);
                    for k in 0..n {
                        let mut acc = 0.0;
                        for r in 0..n - k {
                            acc += h[r] * h[r + k];
                            m[(r, r + k)] += sigma2 * acc;
                            if k > 0 {
                                m[(r + k, r)] += sigma2 * acc;
                            }
                        }
                    }
                }
                _ => {
                    let acv = c.autocovariance(n).expect("stationary component");
                    for r in 0..n {
                        for col in 0..n {
                            m[(r, col)] += acv[r.abs_diff(col)];
                        }
                    }
                }
            }
        }
        m
    }

    /// Simulates a path of length `n` from a seed.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.simulate_with(n, &mut rng)
    }

    /// Simulates a path of length `n`. Components are drawn in order, each consuming its
    /// own block of standard normal innovations.
    pub fn simulate_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        for c in &self.components {
            let path = match *c {
                NoiseComponent::WhiteNoise { sigma2 } => {
                    let s = sigma2.sqrt();
                    (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
                }
                NoiseComponent::PowerLaw { sigma2, alpha } => power_law_path(sigma2, alpha, n, rng),
                NoiseComponent::Flicker { sigma2 } => power_law_path(sigma2, 1.0, n, rng),
                NoiseComponent::Matern { .. } => {
                    let acv = c.autocovariance(n)?;
                    stationary_gaussian_path(&acv, rng)?
                }
            };
            for (a, b) in out.iter_mut().zip(path) {
                *a += b;
            }
        }
        Ok(out)
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Default parameters used when a component is given without values.
fn default_params(kind: ComponentKind) -> Vec<f64> {
    match kind {
        ComponentKind::WhiteNoise | ComponentKind::Flicker => vec![1.0],
        ComponentKind::PowerLaw => vec![1.0, 0.5],
        ComponentKind::Matern => vec![1.0, 0.1, 1.0],
    }
}

impl FromStr for NoiseModel {
    type Err = GmwmxError;

    /// Parses `"wn(10)+pl(6,0.9)"`; a bare tag such as `"wn+fl"` uses default values.
    fn from_str(s: &str) -> Result<Self> {
        let err = |m: String| GmwmxError::ModelParse(m);
        let mut comps = Vec::new();
        for raw in s.split('+') {
            let part = raw.trim();
            let (tag, args) = match part.find('(') {
                Some(i) => {
                    let body =
                        part[i + 1..].strip_suffix(')').ok_or_else(|| err(format!("missing ')' in '{part}'")))?;
                    (&part[..i], Some(body))
                }
                None => (part, None),
            };
            let kind = match tag.trim().to_ascii_lowercase().as_str() {
                "wn" | "white" => ComponentKind::WhiteNoise,
                "pl" | "powerlaw" => ComponentKind::PowerLaw,
                "fl" | "flicker" => ComponentKind::Flicker,
                "matern" | "mat" => ComponentKind::Matern,
                other => return Err(err(format!("unknown component '{other}'"))),
            };
            let params = match args {
                None => default_params(kind),
                Some(body) => body
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| err(format!("'{}': {e}", v.trim()))))
                    .collect::<Result<Vec<_>>>()?,
            };
            comps.push(NoiseComponent::from_params(kind, &params).map_err(|e| err(e.to_string()))?);
        }
        NoiseModel::new(comps)
    }
}

/// MA(∞) coefficients `h_0 = 1, h_i = (alpha/2 + i - 1) h_{i-1} / i` for `i < n`.
pub fn power_law_coefficients(alpha: f64, n: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(n);
    if n == 0 {
        return h;
    }
    h.push(1.0);
    for i in 1..n {
        let prev = h[i - 1];
        h.push((alpha / 2.0 + i as f64 - 1.0) * prev / i as f64);
    }
    h
}

/// Autocovariance of stationary power-law noise at lags `0..n`.
pub fn power_law_autocovariance(sigma2: f64, alpha: f64, n: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(n);
    if n == 0 {
        return r;
    }
    let r0 = sigma2 * (ln_gamma(1.0 - alpha) - 2.0 * ln_gamma(1.0 - alpha / 2.0)).exp();
    r.push(r0);
    for k in 1..n {
        let kf = k as f64;
        let prev = r[k - 1];
        r.push(prev * (alpha / 2.0 + kf - 1.0) / (kf - alpha / 2.0));
    }
    r
}

fn power_law_path<R: Rng + ?Sized>(sigma2: f64, alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let s = sigma2.sqrt();
    let w: Vec<f64> = (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
    let h = power_law_coefficients(alpha, n);
    fft::convolve_truncated(&h, &w, n)
}

/// Exact Gaussian path with Toeplitz covariance `acv` via the Durbin–Levinson
/// factorization, `O(n^2)` time and `O(n)` memory.
pub fn stationary_gaussian_path<R: Rng + ?Sized>(acv: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = acv.len();
    let mut x = Vec::with_capacity(n);
    if n == 0 {
        return Ok(x);
    }
    let mut v = acv[0];
    if v < 0.0 {
        return Err(GmwmxError::FactorizationFailure { step: 0 });
    }
    x.push(v.sqrt() * rng.sample::<f64, _>(StandardNormal));
    if v == 0.0 {
        // A zero-variance process is identically zero.
        x.resize(n, 0.0);
        return Ok(x);
    }
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut tmp: Vec<f64> = Vec::with_capacity(n);
    for t in 1..n {
        // Extend the order-(t-1) predictor to order t.
        let mut num = acv[t];
        for (j, p) in phi.iter().enumerate() {
            num -= p * acv[t - 1 - j];
        }
        let kappa = num / v;
        tmp.clear();
        for j in 0..phi.len() {
            tmp.push(phi[j] - kappa * phi[phi.len() - 1 - j]);
        }
        tmp.push(kappa);
        std::mem::swap(&mut phi, &mut tmp);
        v *= 1.0 - kappa * kappa;
        if v.is_nan() || v <= 0.0 || !v.is_finite() {
            return Err(GmwmxError::FactorizationFailure { step: t });
        }
        let mean: f64 = phi.iter().enumerate().map(|(j, p)| p * x[t - 1 - j]).sum();
        x.push(mean + v.sqrt() * rng.sample::<f64, _>(StandardNormal));
    }
    Ok(x)
}

/// Diagonal averages of the unit-variance flicker covariance over lags `0..n`:
/// `d_k = Σ_{u < n-k} (n-k-u) h_u h_{u+k} / (n-k)`.
pub fn flicker_diagonal_averages(n: usize) -> Vec<f64> {
    nonstationary_diagonal_averages(1.0, n)
}

/// Diagonals this short are summed directly; the FFT error is not small relative to them.
const DIRECT_TAIL: usize = 512;

fn nonstationary_diagonal_averages(alpha: f64, n: usize) -> Vec<f64> {
    let h = power_law_coefficients(alpha, n);
    // Weights centred on the window to keep the FFT products small.
    let c = (n as f64 - 1.0) / 2.0;
    let wh: Vec<f64> = h.iter().enumerate().map(|(i, v)| (i as f64 - c) * v).collect();
    let s0 = fft::cross_correlation(&h, &h);
    let s1 = fft::cross_correlation(&wh, &h);
    (0..n)
        .map(|k| {
            if n - k <= DIRECT_TAIL {
                let s: f64 = (0..n - k).map(|u| (n - k - u) as f64 * h[u] * h[u + k]).sum();
                return s / (n - k) as f64;
            }
            let t = k + n - 1;
            let nk = (n - k) as f64;
            // Σ (n-k-u) h_u h_{u+k} = (n-k-c) S0 - Σ (u-c) h_u h_{u+k}.
            ((nk - c) * s0[t] - s1[t]) / nk
        })
        .collect()
}

/// Direct `O(n^2)` diagonal averages of the unit flicker covariance.
pub fn flicker_diagonal_averages_direct(n: usize) -> Vec<f64> {
    let h = power_law_coefficients(1.0, n);
    (0..n)
        .map(|k| {
            let s: f64 = (0..n - k).map(|u| (n - k - u) as f64 * h[u] * h[u + k]).sum();
            s / (n - k) as f64
        })
        .collect()
}

/// Unit-variance flicker summary over lags `0..len` with edge profiles up to `max_scale`.
pub fn flicker_unit_summary(n: usize, len: usize, max_scale: usize) -> CovarianceSummary {
    let mut seq = flicker_diagonal_averages(n);
    seq.resize(len, 0.0);
    let edge = flicker_edge_profile(n, max_scale);
    CovarianceSummary { mode: CovarianceMode::NonStationary, seq, edge: Some(edge) }
}

/// Edge profile of the unit flicker covariance for scales `1..=max_scale`.
///
/// For lag `k` the diagonal is `D_k(r) = Σ_{i<=r} h_i h_{i+k}`; a Haar filter at scale `j`
/// placed at offset `a` sees the window sum `Σ_{t<M_j} D_k(a+t)`. Grouping filter taps by
/// sign turns the sum over `a` into differences of a second prefix sum of `D_k`.
pub fn flicker_edge_profile(n: usize, max_scale: usize) -> Vec<Vec<f64>> {
    let max_scale = max_scale.min(crate::wavelet::max_scales(n));
    let lmax = if max_scale == 0 { 0 } else { 1usize << max_scale };
    let h = power_law_coefficients(1.0, n);
    let mut edge: Vec<Vec<f64>> = (1..=max_scale).map(|j| vec![0.0; 1 << j]).collect();
    let mut p = vec![0.0; n + 1];
    let mut q = vec![0.0; n + 2];
    for k in 0..lmax.min(n) {
        let len = n - k;
        // p[r] = Σ_{r' < r} D_k(r'), q[s] = Σ_{r < s} p[r].
        let mut d = 0.0;
        p[0] = 0.0;
        for r in 0..len {
            d += h[r] * h[r + k];
            p[r + 1] = p[r] + d;
        }
        q[0] = 0.0;
        for s in 0..=len {
            q[s + 1] = q[s] + p[s];
        }
        let dk = p[len] / len as f64;
        for j in 1..=max_scale {
            let l = 1usize << j;
            if k >= l {
                continue;
            }
            let m = l / 2;
            let mj = n - l + 1;
            // Σ_{a in [a0, a1)} (window sum at a - M_j d_k).
            let range = |a0: usize, a1: usize| -> f64 {
                if a1 <= a0 {
                    return 0.0;
                }
                let s = (q[a1 + mj] - q[a0 + mj]) - (q[a1] - q[a0]);
                s - (a1 - a0) as f64 * mj as f64 * dk
            };
            let same_first = if k < m { range(0, m - k) } else { 0.0 };
            let cross = range(m.saturating_sub(k), m.min(l - k));
            let same_second = if k < m { range(m, l - k) } else { 0.0 };
            let mult = if k == 0 { 1.0 } else { 2.0 };
            let norm = (1u64 << (2 * j)) as f64 * mj as f64;
            edge[j - 1][k] = mult * (same_first - cross + same_second) / norm;
        }
    }
    edge
}
