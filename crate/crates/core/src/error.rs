use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration key is malformed or violates an invariant.
    #[error("config error in `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// The adaptive integrator could not continue.
    #[error("integration failed at t = {t_last}: {msg}")]
    Integration { t_last: f64, msg: String },

    /// Too many ensemble members failed to integrate.
    #[error("ensemble failed: {failures} of {requested} trajectories did not integrate")]
    Ensemble { failures: usize, requested: usize },

    /// A computation would exceed a resource guard.
    #[error("resource guard: {0}")]
    Resource(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Domain(_) => 2,
            Error::Integration { .. } | Error::Ensemble { .. } => 3,
            Error::Resource(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
