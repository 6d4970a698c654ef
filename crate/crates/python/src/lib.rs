//! Python bindings for the gmwmx estimator.

use std::path::PathBuf;

use gmwmx::estimator::design::{ANNUAL, SEMIANNUAL};
use gmwmx::estimator::{self, Correction, FitConfig, IntervalMethod, TrajectoryModel, WvModelTarget};
use gmwmx::io::{self, ReportOptions, TimeSeries};
use gmwmx::sim::SettingSpec;
use gmwmx::{missingness, noise, wavelet, GmwmxError};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

/// Masks cross into Python as lists of 0/1 integers; `Vec<u8>` would become `bytes`.
fn mask_list(mask: Vec<u8>) -> Vec<u32> {
    mask.into_iter().map(u32::from).collect()
}

fn to_py(e: GmwmxError) -> PyErr {
    match e {
        GmwmxError::Io(_) => PyIOError::new_err(e.to_string()),
        _ if e.exit_code() < 3 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Sum of latent noise components, e.g. `NoiseModel("wn(10)+pl(6,0.9)")`.
#[pyclass(name = "NoiseModel", frozen)]
struct PyNoiseModel {
    inner: noise::NoiseModel,
}

#[pymethods]
impl PyNoiseModel {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyNoiseModel { inner: spec.parse().map_err(to_py)? })
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    #[getter]
    fn param_names(&self) -> Vec<&'static str> {
        self.inner.param_names()
    }

    #[getter]
    fn is_stationary(&self) -> bool {
        self.inner.is_stationary()
    }

    /// Gaussian path of length `n`.
    #[pyo3(signature = (n, seed=0))]
    fn simulate(&self, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        self.inner.simulate(n, seed).map_err(to_py)
    }

    /// Theoretical wavelet variance at scales `1..=scales`, adjusted for missingness.
    #[pyo3(signature = (n, scales, missingness=None))]
    fn wavelet_variance(&self, n: usize, scales: usize, missingness: Option<PyMissingnessModel>) -> PyResult<Vec<f64>> {
        let miss = missingness.map_or(missingness::MissingnessModel::COMPLETE, |m| m.inner);
        wavelet::resolve_scales(n, Some(scales)).map_err(to_py)?;
        WvModelTarget::new(n, scales, &miss, None, None).model_wv(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("NoiseModel('{}')", self.inner)
    }
}

/// Two-state Markov missingness with transition probabilities `p1` (observed to missing)
/// and `p2` (missing to observed).
#[pyclass(name = "MissingnessModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyMissingnessModel {
    inner: missingness::MissingnessModel,
}

#[pymethods]
impl PyMissingnessModel {
    #[new]
    fn new(p1: f64, p2: f64) -> PyResult<Self> {
        Ok(PyMissingnessModel { inner: missingness::MissingnessModel::new(p1, p2).map_err(to_py)? })
    }

    /// Transition-frequency estimate from a 0/1 mask.
    #[staticmethod]
    fn estimate(mask: Vec<u8>) -> PyResult<Self> {
        Ok(PyMissingnessModel { inner: missingness::MissingnessModel::estimate(&mask).map_err(to_py)? })
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.inner.p1
    }

    #[getter]
    fn p2(&self) -> f64 {
        self.inner.p2
    }

    /// Stationary probability of observing an epoch.
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[pyo3(signature = (n, seed=0))]
    fn simulate(&self, n: usize, seed: u64) -> Vec<u32> {
        mask_list(self.inner.simulate(n, seed))
    }

    fn __repr__(&self) -> String {
        format!("MissingnessModel(p1={}, p2={})", self.inner.p1, self.inner.p2)
    }
}

/// Output of a fit.
#[pyclass(name = "FitResult", frozen)]
struct PyFitResult {
    #[pyo3(get)]
    beta_names: Vec<String>,
    #[pyo3(get)]
    beta: Vec<f64>,
    #[pyo3(get)]
    std_errors: Vec<f64>,
    #[pyo3(get)]
    intervals: Vec<(f64, f64)>,
    #[pyo3(get)]
    phi: Vec<Vec<f64>>,
    #[pyo3(get)]
    gamma: Vec<f64>,
    #[pyo3(get)]
    gamma_names: Vec<&'static str>,
    #[pyo3(get)]
    noise: String,
    #[pyo3(get)]
    missingness: (f64, f64),
    #[pyo3(get)]
    wv_empirical: Vec<f64>,
    #[pyo3(get)]
    wv_fitted: Vec<f64>,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    timings: Vec<(&'static str, f64)>,
    json: String,
}

#[pymethods]
impl PyFitResult {
    /// JSON report without stage timings.
    fn to_json(&self) -> String {
        self.json.clone()
    }

    fn __repr__(&self) -> String {
        format!("FitResult(noise='{}', beta={:?})", self.noise, self.beta)
    }
}

impl From<estimator::FitResult> for PyFitResult {
    fn from(f: estimator::FitResult) -> Self {
        let json = io::format_fit(&f, &ReportOptions { omit_timings: true, config: Vec::new() });
        let p = f.beta.len();
        PyFitResult {
            phi: (0..p).map(|r| (0..p).map(|c| f.phi[(r, c)]).collect()).collect(),
            gamma: f.noise.params(),
            gamma_names: f.noise.param_names(),
            noise: f.noise.to_string(),
            missingness: (f.missingness.p1, f.missingness.p2),
            wv_empirical: f.wv_empirical.values,
            wv_fitted: f.wv_fitted,
            objective: f.objective,
            converged: f.converged,
            timings: f.timings,
            beta_names: f.beta_names,
            beta: f.beta,
            std_errors: f.std_errors,
            intervals: f.intervals,
            json,
        }
    }
}

fn config(scales: Option<usize>, ci: f64, correction: &str, intervals: &str, seed: u64) -> PyResult<FitConfig> {
    let correction = match correction {
        "residual" => Correction::Residual,
        "none" => Correction::None,
        other => return Err(PyValueError::new_err(format!("correction must be 'residual' or 'none', got '{other}'"))),
    };
    let intervals = match intervals {
        "gaussian" => IntervalMethod::Gaussian,
        "long-memory" => IntervalMethod::LongMemory,
        other => {
            return Err(PyValueError::new_err(format!("intervals must be 'gaussian' or 'long-memory', got '{other}'")))
        }
    };
    Ok(FitConfig { scales, ci_level: ci, correction, intervals, seed, ..FitConfig::default() })
}

/// Fits trend, seasonal terms and offsets plus the noise model to a regularly sampled
/// series. Masked values are ignored.
#[pyfunction]
#[pyo3(signature = (
    values, mask, noise, t0=0.0, sampling_period=1.0, trend=true, seasonal=true, offsets=Vec::new(),
    scales=None, ci=0.95, correction="residual", intervals="gaussian", seed=0
))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    values: Vec<f64>,
    mask: Vec<u8>,
    noise: &str,
    t0: f64,
    sampling_period: f64,
    trend: bool,
    seasonal: bool,
    offsets: Vec<f64>,
    scales: Option<usize>,
    ci: f64,
    correction: &str,
    intervals: &str,
    seed: u64,
) -> PyResult<PyFitResult> {
    if values.len() != mask.len() {
        return Err(PyValueError::new_err("values and mask differ in length"));
    }
    let template: noise::NoiseModel = noise.parse().map_err(to_py)?;
    let traj = TrajectoryModel {
        reference_epoch: Some(t0),
        include_trend: trend,
        seasonal_frequencies: if seasonal { vec![ANNUAL, SEMIANNUAL] } else { Vec::new() },
        offset_epochs: offsets,
    };
    let cfg = config(scales, ci, correction, intervals, seed)?;
    let ts = TimeSeries::regular(t0, sampling_period, values, mask);
    let fit = py.detach(|| estimator::one_step_gmwmx(&ts, &traj, &template, &cfg)).map_err(to_py)?;
    Ok(fit.into())
}

/// `(epochs, values, mask, offsets)` of a series file.
type MomContents = (Vec<f64>, Vec<f64>, Vec<u32>, Vec<f64>);

/// Reads a `.mom` file into `(epochs, values, mask, offsets)`.
#[pyfunction]
fn read_mom(path: PathBuf) -> PyResult<MomContents> {
    let ts = io::read_mom(&path).map_err(to_py)?;
    Ok((ts.epochs, ts.values, mask_list(ts.mask), ts.offsets))
}

/// Empirical Haar wavelet variance and coefficient counts per scale.
#[pyfunction]
#[pyo3(signature = (values, scales=None))]
fn empirical_wv(values: Vec<f64>, scales: Option<usize>) -> PyResult<(Vec<f64>, Vec<usize>)> {
    let wv = wavelet::empirical_wv(&values, scales).map_err(to_py)?;
    Ok((wv.values, wv.counts))
}

/// One replicate of a preset simulation setting as `(epochs, values, mask)`.
#[pyfunction]
#[pyo3(signature = (setting, n=None, missing=None, seed=0))]
fn simulate_setting(
    setting: &str,
    n: Option<usize>,
    missing: Option<usize>,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<u32>)> {
    let mut spec = SettingSpec::preset(setting, None, missing, 1, seed).map_err(to_py)?;
    if let Some(n) = n {
        spec.n = n;
    }
    let ts = spec.replicate(0).map_err(to_py)?;
    Ok((ts.epochs, ts.values, mask_list(ts.mask)))
}

#[pymodule]
fn gmwmx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNoiseModel>()?;
    m.add_class::<PyMissingnessModel>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(read_mom, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_wv, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_setting, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
