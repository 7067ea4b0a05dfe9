use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: `{field}`: {message}")]
    Config { field: String, message: String },

    /// The boundary-leak monitor fired: too much mass reached the outer
    /// tenth of the domain for the Dirichlet wall to be harmless.
    #[error(
        "domain too small: boundary mass fraction {fraction:.3e} exceeds {threshold:.3e} at t = {t}"
    )]
    DomainTooSmall { t: f64, fraction: f64, threshold: f64 },

    #[error("numerical failure at step {step} (t = {t}): {message}")]
    Numerical { step: u64, t: f64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
