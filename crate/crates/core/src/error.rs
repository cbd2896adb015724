use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an out-of-range argument.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two fields (or a field and an operator workspace) were built on
    /// different basis tables.
    #[error("basis mismatch: operands must share one basis table")]
    BasisMismatch,

    /// A primal-only operation was applied to a dual field, or vice versa.
    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),

    /// The evaluation grid cannot resolve the configured basis.
    #[error("grid under-resolved: need at least {required} points per axis, got {got}")]
    GridUnderResolved { required: usize, got: usize },

    /// Numerical quadrature could not be carried out.
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    /// A declared noise assumption failed on a concrete witness.
    #[error("assumption {name} violated: {detail}")]
    AssumptionViolation { name: String, detail: String },

    /// Time integration produced a non-finite state.
    #[error("integration failure at t = {time}: non-finite state")]
    IntegrationFailure { time: f64 },

    /// An ensemble-level reduction was asked for with no paths.
    #[error("empty ensemble")]
    EmptyEnsemble,

    /// Brute-force oracle refused an instance above its size bound.
    #[error("instance too large for exhaustive oracle: {0}")]
    OracleTooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn assumption(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::AssumptionViolation {
            name: name.into(),
            detail: detail.into(),
        }
    }
}
