use thiserror::Error;

/// Errors raised by the library. Inequality violations that are part of a
/// result (schedule validation, experiment assertions) are reported as data,
/// not through this type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("flow exponent {value} exceeds cap {cap}")]
    FlowOverflow { value: f64, cap: f64 },

    #[error("iteration cap {cap} exceeded ({what})")]
    CapExceeded { what: &'static str, cap: u64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("expression error at {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
