use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("friction is not uniformly elliptic: smallest symmetric eigenvalue {min_eig:e}")]
    UnstableFriction { min_eig: f64 },

    #[error("linear system is numerically singular (pivot {pivot:e} at column {column})")]
    SingularSystem { pivot: f64, column: usize },

    #[error("spectra are not separated by the imaginary axis (margins {left:e}, {right:e})")]
    SpectrumOverlap { left: f64, right: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (last refinement gap {gap:e})")]
    ToleranceNotMet { tol: f64, gap: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },

    #[error("size {size} exceeds limit {limit}")]
    SizeLimitExceeded { size: usize, limit: usize },

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("parameter violation: {0}")]
    ParameterViolation(String),

    #[error("step {step:e} exceeds stability bound {bound:e}")]
    StepTooLarge { step: f64, bound: f64 },

    #[error("numerical blowup at t = {t}: |state| = {magnitude:e}")]
    NumericalBlowup { t: f64, magnitude: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("assumption violated at x = {point:?}: {reason}")]
    AssumptionViolated { point: Vec<f64>, reason: String },

    #[error("need at least 2 replicas, got {0}")]
    InsufficientReplicas(usize),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Failures caused by the numerics or the model rather than by the input shape.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::UnstableFriction { .. }
                | Error::SingularSystem { .. }
                | Error::SpectrumOverlap { .. }
                | Error::ToleranceNotMet { .. }
                | Error::NumericalBlowup { .. }
                | Error::AssumptionViolated { .. }
                | Error::DegenerateFit(_)
        )
    }
}
