use thiserror::Error;

/// Errors raised by the key-rate pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScwError {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("numerical instability: {0}")]
    Internal(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no sign change of the calibration residual in delta ∈ ({lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error("post-selection accepts nothing (P = {p:e})")]
    EmptyAcceptance { p: f64 },

    #[error("no positive key rate found (best signed rate {best_rate:e} bit/s)")]
    Infeasible {
        best_rate: f64,
        best: Option<Box<crate::optics::TunableParams>>,
    },

    #[error("Monte Carlo disagrees with the analytic model: {0}")]
    Mismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ScwError>;

pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> ScwError {
    ScwError::Domain {
        what,
        value,
        expected,
    }
}
