use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its documented invariant.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Two inputs that must agree in size do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-uniform sampling: {0}")]
    NonUniformSampling(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Evaluation outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimizer diverged: {0}")]
    Diverged(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Diverged(_))
    }
}
