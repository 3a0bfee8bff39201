use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parity error: {0}")]
    Parity(String),

    #[error("step size collapsed to {h:e} at s = {s}")]
    Stiffness { s: f64, h: f64 },

    #[error("limit not converged: total variation {variation:e} over the final window")]
    NotConverged { variation: f64 },

    #[error("quadrature failed on [{a}, {b}]: {reason}")]
    Quadrature { a: f64, b: f64, reason: String },

    #[error("glue error: {0}")]
    Glue(String),

    #[error("flow step unstable: {0}")]
    Stability(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Parity(_) | Error::Glue(_) | Error::Parse(_) => 2,
            Error::Io(_) => 2,
            Error::Stiffness { .. }
            | Error::NotConverged { .. }
            | Error::Quadrature { .. }
            | Error::Stability(_)
            | Error::Fit(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
