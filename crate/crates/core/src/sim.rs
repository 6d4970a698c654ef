//! Monte Carlo harness: preset settings, replicate fits and aggregate metrics.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GmwmxError, Result};
use crate::estimator::{build_design, fit_design, FitCache, FitConfig, TrajectoryModel};
use crate::io::TimeSeries;
use crate::missingness::MissingnessModel;
use crate::noise::NoiseModel;

/// First epoch (MJD) of simulated series.
pub const SIM_EPOCH0: f64 = 51544.0;

/// Missingness rows `(p1, p2)`, indexed from 1. Row 4 solves `p2` from `p1 = 0.05` and a
/// stationary mean of exactly 0.7.
pub const MISSINGNESS_ROWS: [(f64, f64); 6] =
    [(0.0, 1.0), (0.05, 0.45), (0.05, 0.20), (0.05, 0.35 / 3.0), (0.10, 0.15), (0.10, 0.10)];

/// Missingness model of row `row` (1-based).
pub fn missingness_row(row: usize) -> Result<MissingnessModel> {
    let &(p1, p2) = row
        .checked_sub(1)
        .and_then(|i| MISSINGNESS_ROWS.get(i))
        .ok_or_else(|| GmwmxError::InvalidParameter(format!("missingness setting must be 1..=6, got {row}")))?;
    MissingnessModel::new(p1, p2)
}

/// Noise model of setting family `A`, `B` or `C`.
pub fn setting_noise(family: char) -> Result<NoiseModel> {
    let s = match family.to_ascii_uppercase() {
        'A' => "wn(10)+pl(6,0.9)",
        'B' => "wn(50)+fl(10)",
        'C' => "wn(20)+matern(8,0.05,1.1)",
        _ => return Err(GmwmxError::InvalidParameter(format!("unknown setting family '{family}'"))),
    };
    s.parse()
}

/// Simulation design for one setting.
#[derive(Debug, Clone)]
pub struct SettingSpec {
    pub name: String,
    pub noise: NoiseModel,
    /// Model fitted to each replicate; the true model's kinds by default.
    pub template: NoiseModel,
    pub missingness: MissingnessModel,
    pub n: usize,
    pub reps: usize,
    pub trajectory: TrajectoryModel,
    /// True coefficients, one per design column.
    pub beta: Vec<f64>,
    pub seed: u64,
}

impl SettingSpec {
    pub fn new(name: &str, noise: NoiseModel, missingness: MissingnessModel, n: usize, reps: usize, seed: u64) -> Self {
        let trajectory = TrajectoryModel::default();
        let beta = vec![0.0; trajectory.n_columns()];
        SettingSpec { name: name.into(), template: noise.clone(), noise, missingness, n, reps, trajectory, beta, seed }
    }

    /// Named preset. `A1`, `B1`, `C1` use 10% missingness (row 2) and `years` (default 10)
    /// of daily data; `A2`, `B2`, `C2` use 20 years and missingness row `row` (default 2).
    /// Explicit `years` or `row` override either family.
    pub fn preset(name: &str, years: Option<usize>, row: Option<usize>, reps: usize, seed: u64) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        let mut chars = upper.chars();
        let (family, version) = match (chars.next(), chars.next(), chars.next()) {
            (Some(f), Some(v @ ('1' | '2')), None) => (f, v),
            _ => return Err(GmwmxError::InvalidParameter(format!("unknown setting '{name}'"))),
        };
        let noise = setting_noise(family)?;
        let default_years = if version == '1' { 10 } else { 20 };
        let n = 365 * years.unwrap_or(default_years);
        let miss = missingness_row(row.unwrap_or(2))?;
        Ok(SettingSpec::new(&upper, noise, miss, n, reps, seed))
    }

    pub fn epochs(&self) -> Vec<f64> {
        (0..self.n).map(|i| SIM_EPOCH0 + i as f64).collect()
    }

    /// Replicate `rep`: observed series from the true trajectory plus noise, with its mask.
    /// Each replicate draws from its own stream of the master seed.
    pub fn replicate(&self, rep: u64) -> Result<TimeSeries> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep);
        let noise = self.noise.simulate_with(self.n, &mut rng)?;
        let mask = self.missingness.simulate_with(self.n, &mut rng);
        let x = build_design(&self.epochs(), &self.trajectory);
        let signal = &x * nalgebra::DVector::from_column_slice(&self.beta);
        let values = noise.iter().zip(signal.iter()).map(|(e, s)| e + s).collect();
        Ok(TimeSeries::regular(SIM_EPOCH0, 1.0, values, mask))
    }
}

/// Result of one replicate fit.
#[derive(Debug, Clone)]
pub struct ReplicateOutcome {
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
    pub gamma: Vec<f64>,
    pub seconds: f64,
    pub converged: bool,
}

/// Aggregate metrics of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMetrics {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias2: f64,
    /// Variance with divisor `M`, so that `rmse² = bias2 + variance`.
    pub variance: f64,
    pub rmse: f64,
    /// `None` when no replicate has a non-degenerate interval, or for noise parameters.
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MetricReport {
    pub setting: String,
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    pub non_converged: usize,
    pub mean_seconds: f64,
    pub params: Vec<ParamMetrics>,
}

/// Fraction of intervals containing the truth, with binomial standard error.
/// Degenerate intervals (zero width) are skipped; `None` if none remain.
pub fn coverage(truth: f64, intervals: &[(f64, f64)]) -> Option<(f64, f64)> {
    let valid: Vec<&(f64, f64)> = intervals.iter().filter(|(lo, hi)| hi > lo).collect();
    if valid.is_empty() {
        return None;
    }
    let m = valid.len() as f64;
    let rate = valid.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count() as f64 / m;
    Some((rate, (rate * (1.0 - rate) / m).sqrt()))
}

/// Bias², `1/M` variance and RMSE of estimates of `truth`.
pub fn error_metrics(truth: f64, estimates: &[f64]) -> (f64, f64, f64, f64) {
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let bias2 = (mean - truth).powi(2);
    let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / m;
    (mean, bias2, variance, (bias2 + variance).sqrt())
}

/// Thread pool capped by the `GMWMX_THREADS` environment variable when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GMWMX_THREADS") {
        let k: usize = v.trim().parse().ok().filter(|&k| k > 0).ok_or_else(|| {
            GmwmxError::InvalidParameter(format!("GMWMX_THREADS must be a positive integer, got '{v}'"))
        })?;
        b = b.num_threads(k);
    }
    b.build().map_err(|e| GmwmxError::InvalidParameter(e.to_string()))
}

/// Fits every replicate of `spec`. Failed replicates are `Err` entries.
pub fn run_replicates(spec: &SettingSpec, config: &FitConfig) -> Result<Vec<Result<ReplicateOutcome>>> {
    if spec.beta.len() != spec.trajectory.n_columns() {
        return Err(GmwmxError::InvalidParameter("true coefficient count differs from the design".into()));
    }
    let x = build_design(&spec.epochs(), &spec.trajectory);
    let cache = FitCache::new(&x, &spec.template, config)?;
    let one = |rep: usize| -> Result<ReplicateOutcome> {
        let ts = spec.replicate(rep as u64)?;
        let start = Instant::now();
        let fit = fit_design(&x, &ts.values, &ts.mask, &spec.template, config, Some(&cache))?;
        Ok(ReplicateOutcome {
            seconds: start.elapsed().as_secs_f64(),
            std_errors: fit.std_errors,
            intervals: fit.intervals,
            gamma: fit.noise.params(),
            beta: fit.beta,
            converged: fit.converged,
        })
    };
    let pool = thread_pool()?;
    Ok(pool.install(|| (0..spec.reps).into_par_iter().map(one).collect()))
}

/// Aggregates replicate outcomes into per-parameter metrics.
pub fn summarize(spec: &SettingSpec, outcomes: &[Result<ReplicateOutcome>]) -> MetricReport {
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
    let mut params = Vec::new();
    if !ok.is_empty() {
        for (i, name) in spec.trajectory.column_names().into_iter().enumerate() {
            let est: Vec<f64> = ok.iter().map(|o| o.beta[i]).collect();
            let (mean, bias2, variance, rmse) = error_metrics(spec.beta[i], &est);
            let iv: Vec<(f64, f64)> = ok.iter().map(|o| o.intervals[i]).collect();
            let cov = coverage(spec.beta[i], &iv);
            params.push(ParamMetrics {
                name,
                truth: spec.beta[i],
                mean,
                bias2,
                variance,
                rmse,
                coverage: cov.map(|c| c.0),
                coverage_se: cov.map(|c| c.1),
            });
        }
        let truth = spec.noise.params();
        if spec.template.kinds() == spec.noise.kinds() {
            for (i, name) in spec.noise.param_names().into_iter().enumerate() {
                let est: Vec<f64> = ok.iter().map(|o| o.gamma[i]).collect();
                let (mean, bias2, variance, rmse) = error_metrics(truth[i], &est);
                params.push(ParamMetrics {
                    name: name.into(),
                    truth: truth[i],
                    mean,
                    bias2,
                    variance,
                    rmse,
                    coverage: None,
                    coverage_se: None,
                });
            }
        }
    }
    MetricReport {
        setting: spec.name.clone(),
        n: spec.n,
        replicates: ok.len(),
        failures: outcomes.len() - ok.len(),
        non_converged: ok.iter().filter(|o| !o.converged).count(),
        mean_seconds: if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|o| o.seconds).sum::<f64>() / ok.len() as f64
        },
        params,
    }
}

/// Runs all replicates of a setting and aggregates them.
pub fn run_setting(spec: &SettingSpec, config: &FitConfig) -> Result<MetricReport> {
    Ok(summarize(spec, &run_replicates(spec, config)?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.16e}"))
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut o = String::from("setting,n,parameter,truth,mean,bias2,variance,rmse,coverage,coverage_se\n");
        for p in &self.params {
            writeln!(
                o,
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                self.setting,
                self.n,
                p.name,
                p.truth,
                p.mean,
                p.bias2,
                p.variance,
                p.rmse,
                fmt_opt(p.coverage),
                fmt_opt(p.coverage_se)
            )
            .unwrap();
        }
        o
    }

    pub fn to_json(&self) -> String {
        let params: Vec<serde_json::Value> = self
            .params
            .iter()
            .map(|p| {
                serde_json::json!({
                    "name": p.name,
                    "truth": p.truth,
                    "mean": p.mean,
                    "bias2": p.bias2,
                    "variance": p.variance,
                    "rmse": p.rmse,
                    "coverage": p.coverage,
                    "coverage_se": p.coverage_se,
                })
            })
            .collect();
        let v = serde_json::json!({
            "setting": self.setting,
            "n": self.n,
            "replicates": self.replicates,
            "failures": self.failures,
            "non_converged": self.non_converged,
            "mean_seconds": if self.mean_seconds.is_finite() { Some(self.mean_seconds) } else { None },
            "params": params,
        });
        serde_json::to_string_pretty(&v).expect("report serialization") + "\n"
    }
}
