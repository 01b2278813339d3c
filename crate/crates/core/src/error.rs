use thiserror::Error;

/// Errors raised by the geometry, kernel and quadrature routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed incompatible shapes, models or parameters.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input values are malformed (non-square, non-symmetric, non-finite, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Values that should agree up to rounding do not.
    #[error("numerical inconsistency: {0}")]
    Inconsistency(String),

    /// A geometric precondition failed (no timelike vector, coincident points, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The matrix `N` built at `basepoint` has a negative eigenvalue beyond tolerance.
    #[error(
        "not a kernel of hyperbolic type: eigenvalue {min_eigenvalue:.3e} at basepoint {basepoint}"
    )]
    NotAKernel {
        basepoint: usize,
        min_eigenvalue: f64,
        witness: Vec<f64>,
    },

    /// A permutation does not preserve the kernel.
    #[error("permutation does not preserve the kernel at ({i}, {j}): |{lhs} - {rhs}| too large")]
    NotAnAutomorphism { i: usize, j: usize, lhs: f64, rhs: f64 },

    /// Linear algebra failure (rank deficiency, non-convergent decomposition).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The orbit and spectral estimates of the translation length disagree.
    #[error("classification failed: {0}")]
    Classification(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
