use std::path::PathBuf;

use crate::evolve::SimState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("spectral coefficients are not conjugate symmetric (imaginary residue {residue:.3e} vs norm {norm:.3e})")]
    SymmetryViolation { residue: f64, norm: f64 },

    #[error("derivative order {0} is not supported (maximum 4)")]
    UnsupportedOrder(u32),

    #[error("fractional order {0} is not supported (must be >= 0)")]
    UnsupportedFractionalOrder(f64),

    #[error("invalid exponent {0}")]
    InvalidExponent(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("blow-up detected at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last_good: Box<SimState>,
    },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("stored time stride is not uniform")]
    NonuniformStride,

    #[error("time t = 0 is singular for this estimate")]
    SingularTime,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("kappa iteration does not converge: kappa0 = {kappa0} is not above the threshold {threshold}")]
    NonConvergent { kappa0: f64, threshold: f64 },

    #[error("insufficient points for fit: {0}")]
    InsufficientPoints(usize),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("integrity error in {path}: {message}")]
    Integrity { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn integrity(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Integrity {
            path: path.into(),
            message: message.into(),
        }
    }
}
