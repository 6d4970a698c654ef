//! Wavelet-moment matching for the latent noise parameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{GmwmxError, Result};
use crate::missingness::MissingnessModel;
use crate::noise::{
    flicker_unit_summary, ComponentKind, CovarianceMode, CovarianceSummary, NoiseComponent, NoiseModel,
};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::special::matern_correlations;
use crate::theo_wv::{theoretical_wv_fast, ResidualContext};
use crate::wavelet::{filter_len, WvSpectrum};

/// Matérn correlations below this are set to zero.
const MATERN_CUTOFF: f64 = 1e-17;

/// Model-implied wavelet variance of the observed residual process for a fixed series
/// length, missingness model and (optionally) design.
#[derive(Debug, Clone)]
pub struct WvModelTarget<'a> {
    n: usize,
    scales: usize,
    len: usize,
    mom: Vec<f64>,
    residual: Option<&'a ResidualContext>,
    flicker_unit: Option<&'a CovarianceSummary>,
}

impl<'a> WvModelTarget<'a> {
    /// `flicker_unit`, when given, must be the unit flicker summary for this `n` covering
    /// at least the lags and scales the target needs; it is computed on demand otherwise.
    pub fn new(
        n: usize,
        scales: usize,
        missingness: &MissingnessModel,
        residual: Option<&'a ResidualContext>,
        flicker_unit: Option<&'a CovarianceSummary>,
    ) -> Self {
        let len = if residual.is_some() { n } else { filter_len(scales).min(n) };
        WvModelTarget { n, scales, len, mom: missingness.mask_second_moment(len), residual, flicker_unit }
    }

    /// Number of lags the target consumes.
    pub fn lags(&self) -> usize {
        self.len
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    fn adjust(&self, mut s: CovarianceSummary) -> Result<Vec<f64>> {
        s.seq.resize(self.len, 0.0);
        if let Some(ctx) = self.residual {
            let support = s.seq.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1);
            let c = ctx.correction_zero_tail(&s.seq[..support], self.len);
            for (l, (a, cl)) in s.seq.iter_mut().zip(&c).enumerate() {
                *a += cl / (self.n - l) as f64;
            }
        }
        s.scale_lags(&self.mom);
        theoretical_wv_fast(&s, self.n, self.scales)
    }

    /// Wavelet variance of one component.
    pub fn component_wv(&self, c: &NoiseComponent) -> Result<Vec<f64>> {
        let s = match *c {
            NoiseComponent::Flicker { sigma2 } => {
                let mut s = match self.flicker_unit {
                    Some(u) => u.clone(),
                    None => flicker_unit_summary(self.n, self.len, self.scales),
                };
                s.seq.iter_mut().for_each(|v| *v *= sigma2);
                if let Some(e) = &mut s.edge {
                    e.iter_mut().flatten().for_each(|v| *v *= sigma2);
                }
                s
            }
            NoiseComponent::Matern { sigma2, lambda, alpha } => {
                let mut acv = matern_correlations(alpha - 0.5, lambda, self.len, MATERN_CUTOFF);
                acv.iter_mut().for_each(|v| *v *= sigma2);
                CovarianceSummary { mode: CovarianceMode::Stationary, seq: acv, edge: None }
            }
            _ => CovarianceSummary { mode: CovarianceMode::Stationary, seq: c.autocovariance(self.len)?, edge: None },
        };
        self.adjust(s)
    }

    /// Wavelet variance of a full model.
    pub fn model_wv(&self, model: &NoiseModel) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.scales];
        for c in &model.components {
            for (t, v) in total.iter_mut().zip(self.component_wv(c)?) {
                *t += v;
            }
        }
        Ok(total)
    }
}

/// Options for [`gmwm_fit`].
#[derive(Debug, Clone, Copy)]
pub struct GmwmOptions {
    pub n_starts: usize,
    /// Simplex iterations per start are this times the number of parameters.
    pub iter_per_param: usize,
    pub f_tol: f64,
    /// Tolerance for screening multiple starts before the best is refined.
    pub screen_f_tol: f64,
}

impl Default for GmwmOptions {
    fn default() -> Self {
        GmwmOptions { n_starts: 5, iter_per_param: 500, f_tol: 1e-12, screen_f_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct GmwmFit {
    pub model: NoiseModel,
    pub objective: f64,
    /// False if the final simplex search exhausted its budget.
    pub converged: bool,
    pub evaluations: usize,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Maps a model's parameters to unconstrained coordinates.
pub fn to_unconstrained(model: &NoiseModel) -> Vec<f64> {
    let mut u = Vec::with_capacity(model.n_params());
    for c in &model.components {
        match *c {
            NoiseComponent::WhiteNoise { sigma2 } | NoiseComponent::Flicker { sigma2 } => {
                u.push(sigma2.max(1e-300).ln())
            }
            NoiseComponent::PowerLaw { sigma2, alpha } => {
                u.push(sigma2.max(1e-300).ln());
                u.push(logit(alpha.clamp(1e-12, 1.0 - 1e-12)));
            }
            NoiseComponent::Matern { sigma2, lambda, alpha } => {
                u.push(sigma2.max(1e-300).ln());
                u.push(lambda.ln());
                u.push((alpha - 0.5).max(1e-300).ln());
            }
        }
    }
    u
}

/// Inverse of [`to_unconstrained`] for the given component kinds.
pub fn from_unconstrained(kinds: &[ComponentKind], u: &[f64]) -> Option<NoiseModel> {
    let mut comps = Vec::with_capacity(kinds.len());
    let mut at = 0;
    for &k in kinds {
        let c = match k {
            ComponentKind::WhiteNoise => NoiseComponent::WhiteNoise { sigma2: u[at].exp() },
            ComponentKind::Flicker => NoiseComponent::Flicker { sigma2: u[at].exp() },
            ComponentKind::PowerLaw => NoiseComponent::PowerLaw { sigma2: u[at].exp(), alpha: logistic(u[at + 1]) },
            ComponentKind::Matern => {
                NoiseComponent::Matern { sigma2: u[at].exp(), lambda: u[at + 1].exp(), alpha: 0.5 + u[at + 2].exp() }
            }
        };
        c.validate().ok()?;
        comps.push(c);
        at += k.n_params();
    }
    Some(NoiseModel { components: comps })
}

/// Evaluates `ν(γ)` quickly by reusing unit-variance wavelet variances of the components
/// that are linear in their variance.
pub struct WvEvaluator<'a, 'b> {
    target: &'b WvModelTarget<'a>,
    kinds: Vec<ComponentKind>,
    unit: Vec<Option<Vec<f64>>>,
}

impl<'a, 'b> WvEvaluator<'a, 'b> {
    pub fn new(target: &'b WvModelTarget<'a>, kinds: &[ComponentKind]) -> Result<Self> {
        let unit = kinds
            .iter()
            .map(|k| match k {
                ComponentKind::WhiteNoise => target.component_wv(&NoiseComponent::WhiteNoise { sigma2: 1.0 }).map(Some),
                ComponentKind::Flicker => target.component_wv(&NoiseComponent::Flicker { sigma2: 1.0 }).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WvEvaluator { target, kinds: kinds.to_vec(), unit })
    }

    pub fn wv(&self, model: &NoiseModel) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.target.scales];
        for (i, c) in model.components.iter().enumerate() {
            debug_assert_eq!(c.kind(), self.kinds[i]);
            match &self.unit[i] {
                Some(u) => {
                    let s2 = c.sigma2();
                    for (t, v) in total.iter_mut().zip(u) {
                        *t += s2 * v;
                    }
                }
                None => {
                    for (t, v) in total.iter_mut().zip(self.target.component_wv(c)?) {
                        *t += v;
                    }
                }
            }
        }
        Ok(total)
    }
}

fn quadratic_form(nu_hat: &[f64], nu: &[f64], omega: &DMatrix<f64>) -> f64 {
    let r = DVector::from_iterator(nu.len(), nu_hat.iter().zip(nu).map(|(a, b)| a - b));
    (r.transpose() * omega * &r)[(0, 0)]
}

/// GMWM objective `(ν̂ - ν(γ))ᵀ Ω (ν̂ - ν(γ))`.
pub fn gmwm_objective(
    evaluator: &WvEvaluator,
    nu_hat: &[f64],
    omega: &DMatrix<f64>,
    model: &NoiseModel,
) -> Result<f64> {
    Ok(quadratic_form(nu_hat, &evaluator.wv(model)?, omega))
}

/// Deterministic starting points: shape parameters from a fixed grid, variances from a
/// relative least-squares match of the unit-variance wavelet variances to `ν̂`.
pub fn default_starts(evaluator: &WvEvaluator, nu_hat: &[f64], template: &NoiseModel, count: usize) -> Vec<NoiseModel> {
    const PL_ALPHA: [f64; 5] = [0.5, 0.8, 0.2, 0.95, 0.35];
    const MAT_LAMBDA: [f64; 5] = [0.1, 0.01, 0.5, 0.03, 0.003];
    const MAT_ALPHA: [f64; 5] = [1.0, 1.5, 0.8, 2.0, 1.2];
    let mut starts = Vec::with_capacity(count);
    for s in 0..count {
        let i = s % PL_ALPHA.len();
        let comps: Vec<NoiseComponent> = template
            .components
            .iter()
            .map(|c| match c {
                NoiseComponent::WhiteNoise { .. } => NoiseComponent::WhiteNoise { sigma2: 1.0 },
                NoiseComponent::Flicker { .. } => NoiseComponent::Flicker { sigma2: 1.0 },
                NoiseComponent::PowerLaw { .. } => NoiseComponent::PowerLaw { sigma2: 1.0, alpha: PL_ALPHA[i] },
                NoiseComponent::Matern { .. } => {
                    NoiseComponent::Matern { sigma2: 1.0, lambda: MAT_LAMBDA[i], alpha: MAT_ALPHA[i] }
                }
            })
            .collect();
        let unit = NoiseModel { components: comps };
        let variances = match_variances(evaluator, nu_hat, &unit);
        let mut params = unit.params();
        let mut at = 0;
        for (c, v) in unit.components.iter().zip(&variances) {
            params[at] = *v;
            at += c.kind().n_params();
        }
        if let Ok(m) = unit.with_params(&params) {
            starts.push(m);
        }
    }
    starts
}

fn match_variances(evaluator: &WvEvaluator, nu_hat: &[f64], unit: &NoiseModel) -> Vec<f64> {
    let q = unit.components.len();
    let j = nu_hat.len();
    let floor = nu_hat.iter().cloned().fold(0.0, f64::max) * 1e-12 + f64::MIN_POSITIVE;
    let cols: Vec<Vec<f64>> =
        unit.components.iter().map(|c| evaluator.target.component_wv(c).unwrap_or_else(|_| vec![0.0; j])).collect();
    let a = DMatrix::from_fn(j, q, |r, c| cols[c][r] / nu_hat[r].max(floor));
    let b = DVector::from_element(j, 1.0);
    let sol = a.clone().svd(true, true).solve(&b, 1e-12).unwrap_or_else(|_| DVector::from_element(q, 1.0));
    let total: f64 = sol.iter().map(|v| v.max(0.0)).sum::<f64>().max(1e-300);
    sol.iter().map(|&v| if v > 0.0 { v } else { 1e-3 * total }).collect()
}

/// Minimizes the GMWM objective over the parameters of `template`'s component kinds.
///
/// Every model in `starts` seeds one simplex search; the best end point is returned.
pub fn gmwm_fit(
    nu_hat: &WvSpectrum,
    template: &NoiseModel,
    evaluator: &WvEvaluator,
    omega: &DMatrix<f64>,
    starts: &[NoiseModel],
    opts: &GmwmOptions,
) -> Result<GmwmFit> {
    let q = template.n_params();
    let j = nu_hat.n_scales();
    if q > j {
        return Err(GmwmxError::Unidentifiable { params: q, scales: j });
    }
    let kinds = template.kinds();
    let objective = |u: &[f64]| -> f64 {
        match from_unconstrained(&kinds, u) {
            Some(m) => gmwm_objective(evaluator, &nu_hat.values, omega, &m).unwrap_or(f64::INFINITY),
            None => f64::INFINITY,
        }
    };
    // Convergence is judged on the objective alone: at a boundary of the parameter space
    // the simplex keeps moving in the unconstrained coordinates without improving.
    let strict = NelderMeadOptions {
        max_iter: opts.iter_per_param * q,
        f_tol: opts.f_tol,
        x_tol: f64::INFINITY,
        ..Default::default()
    };
    // With several starts each is first screened at a coarse tolerance and only the best
    // end point is refined at the strict one.
    let screen = NelderMeadOptions { f_tol: opts.screen_f_tol, restarts: 0, ..strict };
    let mut evaluations = 0;
    let from = match starts {
        [] => return Err(GmwmxError::InvalidParameter("no starting point".into())),
        [only] => to_unconstrained(only),
        _ => {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for start in starts {
                let r = nelder_mead(objective, &to_unconstrained(start), &screen);
                evaluations += r.evaluations;
                if best.as_ref().is_none_or(|b| r.f < b.1) {
                    best = Some((r.x, r.f));
                }
            }
            best.map(|b| b.0).unwrap_or_default()
        }
    };
    let r = nelder_mead(objective, &from, &strict);
    evaluations += r.evaluations;
    from_unconstrained(&kinds, &r.x)
        .map(|model| GmwmFit { model, objective: r.f, converged: r.converged, evaluations })
        .ok_or(GmwmxError::InvalidParameter("optimizer left the parameter space".into()))
}
