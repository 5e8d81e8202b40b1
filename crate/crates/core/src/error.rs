use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angular momentum {0}: 2f must be a non-negative integer")]
    AngularMomentum(f64),

    #[error("invalid level scheme: {0}")]
    Scheme(String),

    #[error("polarization vector is zero")]
    ZeroPolarization,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("integration step must be positive and finite, got {0}")]
    Step(f64),

    #[error("state became non-finite during {0}")]
    NonFinite(&'static str),

    #[error("trace {0} has no samples")]
    EmptyTrace(usize),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{model} fit did not converge after {iterations} iterations (cost {cost:.3e}, tau {tau:.3e})")]
    FitNotConverged {
        model: &'static str,
        iterations: usize,
        cost: f64,
        tau: f64,
    },

    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {message}")]
    Csv { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user's configuration or input files
    /// rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::Csv { .. }
                | Error::Scheme(_)
                | Error::AngularMomentum(_)
                | Error::ZeroPolarization
                | Error::InvalidInput(_)
        )
    }
}
