use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate frame: wedge norm {wedge_norm:e} is below the rank tolerance")]
    DegenerateFrame { wedge_norm: f64 },

    #[error("{context}: form is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { context: String, min_eigenvalue: f64 },

    #[error("numerical blow-up at t = {time}: {what}")]
    BlowUp { time: f64, what: String },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("field has nonzero mean {mean:e}; only mean-zero fields are representable")]
    NonZeroMean { mean: f64 },

    #[error("cutoff radius {radius} must be below the torus half-period {half_period}")]
    CutoffTooLarge { radius: f64, half_period: f64 },

    #[error("splitting hypothesis violated at t = {time}: excess {excess:e} along the reported direction")]
    SplittingViolated { time: f64, excess: f64, direction: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
