use thiserror::Error;

/// Errors raised by estimators, samplers and diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),

    #[error("non-finite test function value at {location}")]
    NonFinite { location: String },

    #[error("non-finite log-weight at {location}")]
    NonFiniteWeight { location: String },

    #[error("strategy {strategy} is incompatible with a {representation} test function")]
    StrategyMismatch { strategy: &'static str, representation: &'static str },

    #[error("{what} requires {required} terms, exceeding the cap of {cap}")]
    CapExceeded { what: &'static str, required: u128, cap: u128 },

    #[error("weights are degenerate: {0}")]
    Degenerate(String),

    #[error("duplicate theta value {value} at indices {first} and {second}")]
    DuplicateTheta { value: String, first: usize, second: usize },

    #[error("operation unsupported: {0}")]
    Unsupported(String),

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
