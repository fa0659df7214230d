use thiserror::Error;

use crate::ode::OdeError;
use crate::quad::QuadError;
use crate::units::UnitError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("missing {0}")]
    MissingParameter(&'static str),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error("no sensitivity: {0}")]
    NoSensitivity(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Numeric failures (quadrature, ODE, dead configurations) and IO map to
    /// exit status 2; everything else is a configuration/validation problem.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature(_) | Error::Integration(_) | Error::NoSensitivity(_) | Error::Io { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Unit(_) => "unit",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::MissingParameter(_) => "missing_parameter",
            Error::Quadrature(_) => "quadrature",
            Error::Integration(_) => "integration",
            Error::NoSensitivity(_) => "no_sensitivity",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
