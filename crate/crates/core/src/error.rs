use thiserror::Error;

/// Errors raised by the kernel, the integrators and the Monte Carlo layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The argument of a Wick exponential left the representable range.
    #[error("Wick exponent {exponent:e} exceeds the overflow guard (|z| > 700)")]
    ExponentOverflow { exponent: f64 },

    #[error("step {step} failed: {source}")]
    Step { step: usize, source: Box<Error> },

    #[error("non-finite state {value} produced at step {step}")]
    NonFinite { step: usize, value: f64 },

    #[error("model `{model}` does not declare {constant}")]
    MissingConstant {
        model: String,
        constant: &'static str,
    },

    #[error("model `{0}` has no closed-form solution")]
    NoExactSolution(String),

    #[error("{failed} of {total} paths aborted (limit is 0.1%); first failure at path {first_path}: {first_error}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first_path: u64,
        first_error: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
