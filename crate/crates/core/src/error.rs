use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model or configuration parameter is outside its admissible range.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("{op}: argument {value} outside domain ({reason})")]
    Domain {
        op: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{op} is not supported for the {family} family")]
    Unsupported {
        op: &'static str,
        family: &'static str,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    /// A numerical method produced output that violates a known invariant.
    #[error("numerical method {method} failed: {diagnostics}")]
    Numerical {
        method: &'static str,
        diagnostics: String,
    },

    #[error("precondition of {op} violated: {reason}")]
    Precondition { op: &'static str, reason: String },

    /// Input sits on a boundary where a closed form degenerates.
    #[error("degenerate input for {op}: {reason}")]
    Degenerate { op: &'static str, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(op: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain { op, value, reason }
    }

    pub(crate) fn numerical(method: &'static str, diagnostics: impl Into<String>) -> Self {
        Error::Numerical {
            method,
            diagnostics: diagnostics.into(),
        }
    }

    pub(crate) fn precondition(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Precondition {
            op,
            reason: reason.into(),
        }
    }
}
