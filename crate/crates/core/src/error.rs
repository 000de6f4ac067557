use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter, grid, or configuration entry.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of a formula (index order, s outside [0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Clan count overflow or a similar unrecoverable numeric failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A ratio estimate whose denominator is not distinguishable from zero.
    #[error("unreliable ratio: denominator {mean:e} with stderr {stderr:e}")]
    UnreliableRatio { mean: f64, stderr: f64 },

    /// Too few usable grid points for a power-law fit.
    #[error("fit error: {0}")]
    Fit(String),

    /// The environment law violates a hypothesis required by the requested regime.
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Numerical(_) | Error::UnreliableRatio { .. } | Error::Fit(_) | Error::Io(_) => 3,
            Error::AssumptionViolation(_) => 4,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
