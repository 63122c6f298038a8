use thiserror::Error;

use crate::plant::SimLog;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model is not controllable (singular value ratio {ratio:.3e} <= 1e-9)")]
    NotControllable { ratio: f64 },

    #[error("matrix is not Hurwitz (max eigenvalue real part {max_real:.6e})")]
    NotHurwitz { max_real: f64 },

    #[error("{what}: derivative order {required} required but only {available} available")]
    InsufficientDerivatives {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported dimension {got} for {what} (only {supported} supported)")]
    UnsupportedDimension {
        what: &'static str,
        got: usize,
        supported: usize,
    },

    #[error("singular channel: {0}")]
    SingularChannel(String),

    #[error("lambda_min(Q) = {lambda_min} must exceed 1")]
    QTooSmall { lambda_min: f64 },

    #[error("run became unstable at t = {t:.6} s (state magnitude exceeded 1e6)")]
    UnstableRun { t: f64, partial: Box<SimLog> },

    #[error("step {dt:e} s exceeds stability guard {limit:e} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("metric window [{t0}, {t1}] contains no samples")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
