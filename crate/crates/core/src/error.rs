use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("tail bound {bound:e} exceeds tolerance {tolerance:e}; enlarge x_max")]
    TailTooLarge { bound: f64, tolerance: f64 },

    #[error("profile not absorbed within the allowed extent ({extent})")]
    Truncated { extent: f64 },

    #[error("{0} did not converge")]
    NonConvergence(&'static str),

    #[error("empty sample set")]
    EmptySample,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("replica {replica}: {error}")]
    Replica { replica: usize, error: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN and infinities.
pub(crate) fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be finite, got {v}")))
    }
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {v}")))
    }
}
