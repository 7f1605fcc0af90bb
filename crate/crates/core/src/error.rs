use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported or mismatched dimensions ({0} vs {1})")]
    BadDimension(usize, usize),
    #[error("matrix entry is not finite")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("Bloch vector {0:?} has length above 1/2")]
    InvalidBloch([f64; 3]),
    #[error("Bloch vector length {0:.3e} is too small to define a direction")]
    DegenerateLength(f64),
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },
    #[error("no stationary Gaussian state exists for b = {0} (b must be positive)")]
    NoStationaryState(f64),
    #[error("{what} exceeds the supported size ({limit})")]
    SizeExceeded { what: String, limit: usize },
    #[error("dense state is not invariant under exchange of sites (deviation {0:.3e})")]
    NotExchangeSymmetric(f64),
    #[error("covariance frame mismatch: {0}")]
    FrameMismatch(&'static str),
    #[error("macro trajectory inconsistent with the supplied generator (deviation {0:.3e})")]
    TrajectoryMismatch(f64),
    #[error("{what} drifted to {value:.3e} during evolution")]
    InvariantViolated { what: &'static str, value: f64 },
    #[error("invalid time grid: {0}")]
    BadGrid(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Tags a numerical failure with the module that produced it.
    pub fn in_module(self, module: &'static str) -> Error {
        match self {
            e @ (Error::Numerical { .. } | Error::Config(_) | Error::Io { .. }) => e,
            other => Error::Numerical {
                module,
                source: Box::new(other),
            },
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::BadDimension(..)
                | Error::NonFinite
                | Error::NotHermitian(_)
                | Error::NotPositive(_)
                | Error::InvalidBloch(_)
        )
    }
}
