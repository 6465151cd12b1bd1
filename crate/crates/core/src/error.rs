use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("parameter `{name}` violates {constraint} (got {value})")]
    InvalidParameter {
        name: String,
        constraint: String,
        value: String,
    },

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{what} exceeds cap: requested {requested}, limit {limit}")]
    CapExceeded {
        what: String,
        requested: u128,
        limit: u128,
    },

    #[error("pinning is infeasible: no positive-weight extension")]
    InfeasiblePinning,

    #[error("pair (site {site}, spin {spin}) is infeasible under the pinning")]
    InfeasiblePair { site: usize, spin: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("region cannot be sampled: {0}")]
    RegionNotSampleable(String),

    #[error("point is outside the region")]
    OutsideRegion,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Precondition(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// An [`Error::InvalidParameter`] naming the violated constraint.
    pub fn param(name: &str, constraint: &str, value: impl ToString) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            constraint: constraint.to_string(),
            value: value.to_string(),
        }
    }

    pub(crate) fn cap(what: &str, requested: u128, limit: u128) -> Self {
        Error::CapExceeded {
            what: what.to_string(),
            requested,
            limit,
        }
    }
}
