use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("non-finite value {value} at {what} = {at}")]
    NonFinite { what: &'static str, at: f64, value: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error {error}, requested {requested}")]
    Quadrature {
        estimate: f64,
        error: f64,
        requested: f64,
    },

    #[error("integral diverges (partial value {partial})")]
    Divergence { partial: f64 },

    #[error("root-find failed: {0}")]
    NoConvergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("moment condition fails: {0}")]
    Moment(String),

    #[error("martingale condition violated: residual {residual} at x = {x}")]
    Calibration { x: f64, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(what: &'static str, at: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, at, value })
    }
}
