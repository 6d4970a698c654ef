//! One-step GMWMX: least squares, missingness estimation, two-stage GMWM and inference.

use std::time::Instant;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GmwmxError, Result};
use crate::estimator::design::{build_design, TrajectoryModel};
use crate::estimator::gmwm::{default_starts, gmwm_fit, GmwmOptions, WvEvaluator, WvModelTarget};
use crate::estimator::long_memory::{empirical_quantile, simulate_limit};
use crate::estimator::ls::least_squares_missing;
use crate::estimator::phi::{phi_hat_factored, DesignFactor};
use crate::io::TimeSeries;
use crate::missingness::MissingnessModel;
use crate::noise::{flicker_unit_summary, ComponentKind, CovarianceSummary, NoiseComponent, NoiseModel};
use crate::theo_wv::ResidualContext;
use crate::wavelet::{empirical_wv, filter_len, resolve_scales, WvSpectrum};
use crate::wv_cov::{ridge_inverse, wv_covariance, WV_COV_CAP};

/// How the theoretical wavelet variance accounts for the least-squares projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    /// Use the noise covariance directly.
    None,
    /// Correct each lag for the projection onto the design.
    Residual,
}

/// Reference distribution of the confidence intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalMethod {
    Gaussian,
    /// Monte Carlo limit law when the fitted model has a long-memory power-law component;
    /// Gaussian otherwise.
    LongMemory,
}

impl IntervalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalMethod::Gaussian => "gaussian",
            IntervalMethod::LongMemory => "long_memory",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Number of wavelet scales; `floor(log2 n) - 1` when `None`.
    pub scales: Option<usize>,
    pub ci_level: f64,
    pub correction: Correction,
    pub gmwm: GmwmOptions,
    /// Largest `n` for the exact wavelet variance covariance of non-stationary models.
    pub wv_cov_cap: usize,
    pub intervals: IntervalMethod,
    pub long_memory_reps: usize,
    pub long_memory_grid: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            scales: None,
            ci_level: 0.95,
            correction: Correction::Residual,
            gmwm: GmwmOptions::default(),
            wv_cov_cap: WV_COV_CAP,
            intervals: IntervalMethod::Gaussian,
            long_memory_reps: 2000,
            long_memory_grid: 256,
            seed: 0,
        }
    }
}

/// Design-dependent quantities shared by fits on the same design and noise template.
#[derive(Debug, Clone)]
pub struct FitCache {
    n: usize,
    scales: usize,
    factor: DesignFactor,
    residual: Option<ResidualContext>,
    flicker: Option<CovarianceSummary>,
}

impl FitCache {
    pub fn new(x: &DMatrix<f64>, template: &NoiseModel, config: &FitConfig) -> Result<Self> {
        let n = x.nrows();
        let scales = resolve_scales(n, config.scales)?;
        let factor = DesignFactor::new(x)?;
        let residual = match config.correction {
            Correction::Residual => Some(ResidualContext::new(x)?),
            Correction::None => None,
        };
        let len = if residual.is_some() { n } else { filter_len(scales).min(n) };
        let flicker = template.kinds().contains(&ComponentKind::Flicker).then(|| flicker_unit_summary(n, len, scales));
        Ok(FitCache { n, scales, factor, residual, flicker })
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_names: Vec<String>,
    pub beta: Vec<f64>,
    pub phi: DMatrix<f64>,
    /// `sqrt(diag Φ̂)`.
    pub std_errors: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub ci_level: f64,
    /// Method actually used for the intervals.
    pub interval_method: IntervalMethod,
    pub noise: NoiseModel,
    pub missingness: MissingnessModel,
    pub wv_empirical: WvSpectrum,
    pub wv_fitted: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    /// Condition number of the column-equilibrated masked design.
    pub condition: f64,
    /// Wall time per stage in seconds.
    pub timings: Vec<(&'static str, f64)>,
}

struct Clock {
    last: Instant,
    stages: Vec<(&'static str, f64)>,
}

impl Clock {
    fn new() -> Self {
        Clock { last: Instant::now(), stages: Vec::new() }
    }

    fn lap(&mut self, name: &'static str) {
        let now = Instant::now();
        self.stages.push((name, (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

/// Fits the trajectory model and latent noise model to a series.
pub fn one_step_gmwmx(
    ts: &TimeSeries,
    traj: &TrajectoryModel,
    template: &NoiseModel,
    config: &FitConfig,
) -> Result<FitResult> {
    let x = build_design(&ts.epochs, traj);
    let mut fit = fit_design(&x, &ts.values, &ts.mask, template, config, None)?;
    fit.beta_names = traj.column_names();
    Ok(fit)
}

/// Fits on an explicit design. `cache` must have been built for the same design, template
/// kinds and configuration.
pub fn fit_design(
    x: &DMatrix<f64>,
    y: &[f64],
    mask: &[u8],
    template: &NoiseModel,
    config: &FitConfig,
    cache: Option<&FitCache>,
) -> Result<FitResult> {
    let n = x.nrows();
    if !(config.ci_level > 0.0 && config.ci_level < 1.0) {
        return Err(GmwmxError::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {}",
            config.ci_level
        )));
    }
    let scales = resolve_scales(n, config.scales)?;
    let q = template.n_params();
    if q > scales {
        return Err(GmwmxError::Unidentifiable { params: q, scales });
    }
    let mut clock = Clock::new();
    let owned;
    let cache = match cache {
        Some(c) => {
            assert!(c.n == n && c.scales == scales, "fit cache built for a different problem");
            c
        }
        None => {
            owned = FitCache::new(x, template, config)?;
            &owned
        }
    };
    clock.lap("precompute");

    let ls = least_squares_missing(x, y, mask)?;
    clock.lap("least_squares");
    let missingness = MissingnessModel::estimate(mask)?;
    clock.lap("missingness");
    let wv_empirical = empirical_wv(&ls.residuals, Some(scales))?;
    clock.lap("empirical_wv");

    let beta: Vec<f64> = ls.beta.iter().copied().collect();
    let p = beta.len();
    let beta_names = (0..p).map(|i| format!("beta_{i}")).collect();
    let y_scale = y.iter().zip(mask).filter(|(_, &z)| z != 0).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    let nu_max = wv_empirical.values.iter().cloned().fold(0.0, f64::max);
    if nu_max <= (1e-12 * y_scale).powi(2) {
        // Residuals are rounding noise: the fit is exact and carries no uncertainty.
        let zeros: Vec<f64> = template
            .params()
            .iter()
            .enumerate()
            .map(|(i, v)| if is_variance(template, i) { 0.0 } else { *v })
            .collect();
        let noise = template.with_params(&zeros)?;
        return Ok(FitResult {
            beta_names,
            intervals: beta.iter().map(|&b| (b, b)).collect(),
            beta,
            phi: DMatrix::zeros(p, p),
            std_errors: vec![0.0; p],
            ci_level: config.ci_level,
            interval_method: IntervalMethod::Gaussian,
            noise,
            missingness,
            wv_fitted: vec![0.0; scales],
            wv_empirical,
            objective: 0.0,
            converged: true,
            condition: ls.condition,
            timings: clock.stages,
        });
    }

    let target = WvModelTarget::new(n, scales, &missingness, cache.residual.as_ref(), cache.flicker.as_ref());
    let evaluator = WvEvaluator::new(&target, &template.kinds())?;
    clock.lap("unit_wv");

    let starts = default_starts(&evaluator, &wv_empirical.values, template, config.gmwm.n_starts.max(1));
    let pilot =
        gmwm_fit(&wv_empirical, template, &evaluator, &DMatrix::identity(scales, scales), &starts, &config.gmwm)?;
    clock.lap("pilot_fit");

    let v_pilot = wv_covariance(&pilot.model, n, scales, config.wv_cov_cap)?;
    let ridge = crate::wv_cov::RIDGE * v_pilot.trace() / scales as f64;
    let omega_diag = DMatrix::from_fn(scales, scales, |a, b| {
        let v = v_pilot[(a, a)] + ridge;
        if a == b && v > 0.0 {
            1.0 / v
        } else if a == b {
            1.0
        } else {
            0.0
        }
    });
    let first =
        gmwm_fit(&wv_empirical, template, &evaluator, &omega_diag, std::slice::from_ref(&pilot.model), &config.gmwm)?;
    clock.lap("first_fit");

    let v_hat = wv_covariance(&first.model, n, scales, config.wv_cov_cap)?;
    let omega = if v_hat.trace() > 0.0 { ridge_inverse(&v_hat)? } else { omega_diag };
    clock.lap("wv_covariance");
    let last = gmwm_fit(&wv_empirical, template, &evaluator, &omega, std::slice::from_ref(&first.model), &config.gmwm)?;
    clock.lap("final_fit");

    let phi = phi_hat_factored(&cache.factor, &last.model, &missingness)?;
    let std_errors: Vec<f64> = (0..p).map(|i| phi[(i, i)].max(0.0).sqrt()).collect();
    clock.lap("phi");

    let alpha = 1.0 - config.ci_level;
    let memory = match config.intervals {
        IntervalMethod::LongMemory => long_memory_parameter(&last.model),
        IntervalMethod::Gaussian => None,
    };
    let (intervals, interval_method) = match memory {
        Some(d) => {
            let draws =
                simulate_limit(x, d, missingness.mu(), config.long_memory_grid, config.long_memory_reps, config.seed)?;
            let iv = draws
                .into_iter()
                .enumerate()
                .map(|(i, mut col)| {
                    let m = col.len() as f64;
                    let mean = col.iter().sum::<f64>() / m;
                    let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
                    col.sort_by(f64::total_cmp);
                    let lo = empirical_quantile(&col, alpha / 2.0) / sd;
                    let hi = empirical_quantile(&col, 1.0 - alpha / 2.0) / sd;
                    (beta[i] - hi * std_errors[i], beta[i] - lo * std_errors[i])
                })
                .collect();
            (iv, IntervalMethod::LongMemory)
        }
        None => {
            let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
            let iv = beta.iter().zip(&std_errors).map(|(b, s)| (b - z * s, b + z * s)).collect();
            (iv, IntervalMethod::Gaussian)
        }
    };
    let wv_fitted = evaluator.wv(&last.model)?;
    clock.lap("intervals");

    Ok(FitResult {
        beta_names,
        beta,
        phi,
        std_errors,
        intervals,
        ci_level: config.ci_level,
        interval_method,
        noise: last.model,
        missingness,
        wv_empirical,
        wv_fitted,
        objective: last.objective,
        converged: last.converged,
        condition: ls.condition,
        timings: clock.stages,
    })
}

fn is_variance(model: &NoiseModel, index: usize) -> bool {
    let mut at = 0;
    for c in &model.components {
        if index == at {
            return true;
        }
        at += c.kind().n_params();
    }
    false
}

/// Memory parameter `d = α/2` of the largest-variance power-law component with `α > 0`.
pub fn long_memory_parameter(model: &NoiseModel) -> Option<f64> {
    model
        .components
        .iter()
        .filter_map(|c| match *c {
            NoiseComponent::PowerLaw { sigma2, alpha } if alpha > 0.0 && sigma2 > 0.0 => Some((sigma2, alpha / 2.0)),
            _ => None,
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, d)| d)
}
