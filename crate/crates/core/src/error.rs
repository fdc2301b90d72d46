use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex {vertex} is not Hurwitz: eigenvalue {re:.6}{im:+.6}i")]
    NotHurwitz { vertex: usize, re: f64, im: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("no RPI set found on any line-search point (best residual {best_residual:.3e})")]
    NoRpiFound {
        /// `(tau2, residual)` per grid point; the residual is the most
        /// positive eigenvalue reached by the feasibility phase.
        residuals: Vec<(f64, f64)>,
        best_residual: f64,
    },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("time {t} outside trajectory range [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },

    #[error("horizontal speed {speed:.4} m/s below yaw-slaving minimum {min} m/s")]
    SpeedTooLow { speed: f64, min: f64 },

    #[error("force-balance singularity: {0}")]
    Singular(String),

    #[error("attitude map domain error: {0}")]
    Domain(String),

    #[error("point not on ellipsoid boundary (x'Px = {0})")]
    NotOnBoundary(f64),

    #[error("frame/label mismatch: {0}")]
    LabelMismatch(String),

    #[error("{0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
