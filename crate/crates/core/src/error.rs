use thiserror::Error;

/// Errors reported by the theory and lab routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariance eigenvalue must be positive, got {0}")]
    NonPositiveEigenvalue(f64),

    #[error("function returned a non-finite value on atom (lambda={lambda}, b={b})")]
    NonFiniteExpectation { lambda: f64, b: f64 },

    #[error("overparameterization ratio must satisfy {expected}, got kappa={kappa}")]
    InvalidKappa { kappa: f64, expected: &'static str },

    #[error("fixed-point bracket expansion exceeded 1e30; the atom law is degenerate")]
    BracketExhausted,

    #[error("gamma denominator {0} is not positive; inputs are inconsistent")]
    GammaDenominator(f64),

    #[error("sparsity fraction must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("mixture is a point mass; no threshold attains sparsity {0} < 1")]
    DegenerateMixture(f64),

    #[error("subset energy {subset} exceeds total energy {total}")]
    SubsetEnergy { subset: f64, total: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is rank deficient: singular value ratio {0:.3e} below cutoff")]
    RankDeficient(f64),

    #[error("covariance is not positive definite (eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("eigendecomposition failed to converge")]
    EigenFailed,

    #[error("k = n sits at the interpolation threshold; the risk diverges there")]
    InterpolationThreshold,

    #[error("support is empty")]
    EmptySupport,

    #[error("solution failed validation: {0}")]
    NumericalFailure(String),
}
