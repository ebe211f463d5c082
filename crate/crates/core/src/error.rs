use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter or input violates its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The quantity is mathematically undefined for the given inputs
    /// (zero denominators, empty accidental set, ...).
    #[error("undefined result: {0}")]
    Undefined(String),

    /// Non-finite intermediate values or a degenerate linear system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN/inf and negative values for a named parameter.
pub(crate) fn ensure_non_negative<T: num_traits::Float>(
    name: &'static str,
    value: T,
) -> Result<()> {
    if !value.is_finite() || value < T::zero() {
        return Err(Error::invalid(name, "must be finite and >= 0"));
    }
    Ok(())
}

pub(crate) fn ensure_positive<T: num_traits::Float>(name: &'static str, value: T) -> Result<()> {
    if !value.is_finite() || value <= T::zero() {
        return Err(Error::invalid(name, "must be finite and > 0"));
    }
    Ok(())
}

pub(crate) fn ensure_unit_interval<T: num_traits::Float>(
    name: &'static str,
    value: T,
) -> Result<()> {
    if !value.is_finite() || value < T::zero() || value > T::one() {
        return Err(Error::invalid(name, "must lie in [0, 1]"));
    }
    Ok(())
}
