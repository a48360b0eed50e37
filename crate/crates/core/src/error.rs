use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("non-finite coordinate in point")]
    NonFinite,

    #[error("invalid group definition: {0}")]
    InvalidGroup(String),

    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),

    #[error("degenerate arc [{0}, {1}]")]
    DegenerateArc(usize, usize),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("empty point set")]
    Empty,

    #[error("level {level}: net spacing {spacing:e} does not exceed the curve sampling resolution {resolution:e}")]
    ResolutionTooCoarse { level: i32, spacing: f64, resolution: f64 },

    #[error("scale {scale:e} is below the sampling resolution {resolution:e}")]
    ScaleBelowResolution { scale: f64, resolution: f64 },

    #[error("no admissible configuration found after {attempts} attempts")]
    NoAdmissibleSamples { attempts: usize },

    #[error("kernel evaluated at the identity")]
    KernelPole,

    #[error("truncation radius must be positive, got {0}")]
    NonPositiveTruncation(f64),

    #[error("cube axiom {axiom} failed at level {level}, cube {cube}: {detail}")]
    CubeVerification {
        axiom: &'static str,
        level: i32,
        cube: usize,
        detail: String,
    },

    #[error("{0} samples exceeds the dense operator cap of {1}")]
    TooManySamples(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
