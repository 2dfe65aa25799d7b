use alloc::string::String;

/// Errors raised by the model, the solvers and the estimators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("degenerate parameters: {0}")]
    Degenerate(&'static str),
    #[error("grid too small: {0}")]
    Grid(String),
    #[error("numerical failure at t = {t}: {detail}")]
    Numerical { t: f64, detail: String },
    #[error("{what} = {requested} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        requested: u64,
        limit: u64,
    },
    #[error("log-space difference would be negative")]
    NegativeDifference,
    #[error("outcome fractions F*G sum to {0}, expected 1")]
    Unnormalized(f64),
    #[error("engine {engine} unavailable: {reason}")]
    Engine {
        engine: &'static str,
        reason: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
