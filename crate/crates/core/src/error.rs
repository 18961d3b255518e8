use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, out of range or inconsistent.
    #[error("invalid configuration: `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("position {x} cm is outside the bath [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The wave field became non-finite.
    #[error("wave field diverged at step {step} (max |eta| = {max_eta:e} cm)")]
    Divergence { step: u64, max_eta: f64 },

    /// The droplet went somewhere the model forbids (central cavity, outside the bath).
    #[error("model violation: droplet {side} at x = {x} cm, t = {t} s: {reason}")]
    ModelViolation { side: char, x: f64, t: f64, reason: String },

    #[error("bisection bracket [{lo}, {hi}] has no sign change (growth rates {rate_lo:e}, {rate_hi:e} 1/s)")]
    Bracket { lo: f64, hi: f64, rate_lo: f64, rate_hi: f64 },

    #[error("empty sample: no outcomes to estimate from")]
    EmptySample,

    #[error("probability table composition: {0}")]
    Composition(String),

    #[error("unknown label `{0}`")]
    Lookup(String),

    #[error("malformed probability table: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
