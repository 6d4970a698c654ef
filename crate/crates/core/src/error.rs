use thiserror::Error;

/// Errors raised by the estimation pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum GmwmxError {
    #[error("model has a non-stationary component; use diagonal averages instead")]
    NonStationaryComponentPresent,
    #[error("covariance factorization failed at step {step}")]
    FactorizationFailure { step: usize },
    #[error("degenerate missingness chain: p1 = p2 = 0")]
    DegenerateChain,
    #[error("every observation is missing")]
    AllMissing,
    #[error("series of length {n} is too short (need at least {needed})")]
    SeriesTooShort { n: usize, needed: usize },
    #[error("requested {scales} scales but a series of length {n} supports at most {max}")]
    ScaleBudgetExceeded { scales: usize, n: usize, max: usize },
    #[error("dense computation of size {n} exceeds the cap {cap}")]
    OracleSizeExceeded { n: usize, cap: usize },
    #[error("covariance sequence has {have} lags but {need} are required")]
    InsufficientLags { have: usize, need: usize },
    #[error("design matrix is rank deficient")]
    RankDeficientDesign,
    #[error("masked design is numerically singular (condition number {condition:.3e})")]
    SingularMaskedDesign { condition: f64 },
    #[error("{params} noise parameters cannot be identified from {scales} scales")]
    Unidentifiable { params: usize, scales: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse noise model: {0}")]
    ModelParse(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: epochs are not increasing")]
    NonMonotoneEpochs { line: usize },
    #[error("line {line}: duplicate epoch")]
    DuplicateEpoch { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GmwmxError {
    /// Process exit code: 1 for usage errors, 2 for data errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use GmwmxError::*;
        match self {
            InvalidParameter(_) | ModelParse(_) | ScaleBudgetExceeded { .. } => 1,
            AllMissing
            | SeriesTooShort { .. }
            | Parse { .. }
            | NonMonotoneEpochs { .. }
            | DuplicateEpoch { .. }
            | Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, GmwmxError>;
