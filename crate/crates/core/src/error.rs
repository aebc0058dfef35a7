use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum AuditError {
    #[error("point outside the map's domain: {0}")]
    Domain(String),
    #[error("Jacobian determinant below 1e-14 at the evaluation point")]
    SingularJacobian,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("integral did not converge or is not positive: {0}")]
    NonIntegrable(String),
    #[error("evaluation budget exceeded (best estimate {value}, err_est {err_est})")]
    BudgetExceeded { value: f64, err_est: f64 },
    #[error("NaN encountered while integrating")]
    NaNEncountered,
    #[error("polygon is degenerate (area below 1e-14)")]
    DegeneratePolygon,
    #[error("constraint subspace misses the density support")]
    EmptySupport,
    #[error("tube-limit extrapolation failed the Cauchy criterion at {0}")]
    NoConvergence(f64),
    #[error("denominator evidence is zero")]
    DivideByZero,
    #[error("likelihood must be positive, got {0}")]
    NonPositiveLikelihood(f64),
    #[error("evidence is singular at sigma = {0}")]
    SingularEvidence(f64),
    #[error("no maximum inside the bracket ({0}, {1})")]
    NoMaximumInBracket(f64, f64),
    #[error("data intervals have empty intersection")]
    EmptyIntersection,
    #[error("non-finite density value at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("density must be strictly positive for transport construction")]
    NonPositiveDensity,
    #[error("CDF inversion failed to bracket the target")]
    CdfInversionFailure,
    #[error("scenario validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, AuditError>;
