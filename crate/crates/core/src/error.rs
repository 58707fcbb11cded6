use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("gimbal singularity: |sin beta| = {sin_beta:.3e} below {tolerance:.0e}")]
    GimbalSingularity { sin_beta: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("particle escaped beyond {radius:.3e} m at t = {t:.6e} s")]
    Escaped { t: f64, radius: f64 },

    #[error("integration produced non-finite state at t = {t:.6e} s")]
    NonFinite { t: f64 },

    #[error("drift matrix is not Hurwitz (max real eigenvalue part {max_real:.3e})")]
    NotHurwitz { max_real: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("series too short: {0}")]
    SeriesTooShort(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
