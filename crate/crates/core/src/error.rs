use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pole set: {0}")]
    InvalidPoles(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerator degree {numerator} must be below denominator degree {denominator}")]
    ImproperRational {
        numerator: usize,
        denominator: usize,
    },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("numerical divergence in {what} at t = {t}")]
    Divergence { what: String, t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn diverged(what: impl Into<String>, t: f64) -> Self {
        Error::Divergence {
            what: what.into(),
            t,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidPoles(_)
                | Error::Dimension(_)
                | Error::ImproperRational { .. }
                | Error::InvalidConfig { .. }
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
