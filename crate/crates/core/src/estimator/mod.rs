//! Trajectory estimation with latent noise: design, least squares, GMWM, covariance and
//! confidence intervals.

pub mod design;
pub mod gmwm;
pub mod long_memory;
pub mod ls;
pub mod phi;
pub mod pipeline;

pub use design::{build_design, TrajectoryModel};
pub use gmwm::{gmwm_fit, GmwmFit, GmwmOptions, WvEvaluator, WvModelTarget};
pub use long_memory::{long_memory_quantiles, FbmSampler, LongMemoryTable};
pub use ls::{least_squares_missing, LsFit};
pub use phi::{phi_hat, DesignFactor};
pub use pipeline::{fit_design, one_step_gmwmx, Correction, FitCache, FitConfig, FitResult, IntervalMethod};
