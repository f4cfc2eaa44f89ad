use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A hypothesis required by an analytic result does not hold. The payload
    /// names the violated condition, e.g. `beta*a <= 8/3`.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The curve description is unusable (self-intersection, cusp, bad shape).
    #[error("invalid curve: {0}")]
    Geometry(String),

    /// An iterative procedure stopped without meeting its tolerance.
    #[error("{what} did not converge to tolerance {tol:e} after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: String,
        tol: f64,
        iterations: usize,
        residual: f64,
    },

    /// An analytically guaranteed property failed numerically; reported as is.
    #[error("internal check failed: {0}")]
    Internal(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
