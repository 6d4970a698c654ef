//! Trajectory design matrix: intercept, trend, seasonal harmonics and offsets.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Annual and semi-annual frequencies in cycles per day.
pub const ANNUAL: f64 = 1.0 / 365.25;
pub const SEMIANNUAL: f64 = 2.0 / 365.25;

/// Deterministic part of the observation model.
///
/// Columns are ordered `[intercept, trend, cos f1, sin f1, cos f2, sin f2, ..., offsets]`;
/// the trend column is omitted when `include_trend` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryModel {
    /// Epoch at which the trend and harmonics are anchored; the first epoch when `None`.
    pub reference_epoch: Option<f64>,
    pub include_trend: bool,
    /// Seasonal frequencies in cycles per time unit of the epochs.
    pub seasonal_frequencies: Vec<f64>,
    /// Epochs of Heaviside steps.
    pub offset_epochs: Vec<f64>,
}

impl Default for TrajectoryModel {
    fn default() -> Self {
        TrajectoryModel {
            reference_epoch: None,
            include_trend: true,
            seasonal_frequencies: vec![ANNUAL, SEMIANNUAL],
            offset_epochs: Vec::new(),
        }
    }
}

impl TrajectoryModel {
    pub fn n_columns(&self) -> usize {
        1 + usize::from(self.include_trend) + 2 * self.seasonal_frequencies.len() + self.offset_epochs.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        if self.include_trend {
            names.push("trend".into());
        }
        for k in 1..=self.seasonal_frequencies.len() {
            names.push(format!("cos_{k}"));
            names.push(format!("sin_{k}"));
        }
        for k in 1..=self.offset_epochs.len() {
            names.push(format!("offset_{k}"));
        }
        names
    }

    /// Index of the trend column, if present.
    pub fn trend_index(&self) -> Option<usize> {
        self.include_trend.then_some(1)
    }
}

/// Builds the `n x p` design matrix for the given epochs.
pub fn build_design(epochs: &[f64], model: &TrajectoryModel) -> DMatrix<f64> {
    let n = epochs.len();
    let t0 = model.reference_epoch.or_else(|| epochs.first().copied()).unwrap_or(0.0);
    let mut x = DMatrix::<f64>::zeros(n, model.n_columns());
    for (i, &t) in epochs.iter().enumerate() {
        let dt = t - t0;
        let mut c = 0;
        x[(i, c)] = 1.0;
        c += 1;
        if model.include_trend {
            x[(i, c)] = dt;
            c += 1;
        }
        for &f in &model.seasonal_frequencies {
            let (s, co) = (2.0 * PI * f * dt).sin_cos();
            x[(i, c)] = co;
            x[(i, c + 1)] = s;
            c += 2;
        }
        for &e in &model.offset_epochs {
            x[(i, c)] = if t >= e { 1.0 } else { 0.0 };
            c += 1;
        }
    }
    x
}
