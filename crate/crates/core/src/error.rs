use thiserror::Error;

/// Errors produced by the mixture algebra, inference and planning routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance is not symmetric")]
    NotSymmetric,

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("total weight is zero")]
    ZeroWeight,

    #[error("mixture has no positive mass to normalize")]
    NonPositiveMass,

    #[error("posterior mass {0:e} is below the representable threshold")]
    ZeroPosteriorMass(f64),

    #[error("unknown observation label `{0}`")]
    UnknownLabel(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("variational update degenerated: {0}")]
    Degenerate(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
