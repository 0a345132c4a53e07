use alloc::string::String;

/// Errors raised by the identification core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("quadratic form is not strictly concave (largest eigenvalue {max_eig:e})")]
    NotConcave { max_eig: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix")]
    Singular,
    #[error("E(x) is singular at time step {step}")]
    SingularE { step: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rank deficient snapshots: sigma_n / sigma_1 = {ratio:e}")]
    RankDeficient { ratio: f64 },
    #[error("model is not state-affine")]
    NotStateAffine,
    #[error("degree overflow: {0}")]
    DegreeOverflow(String),
    #[error("inconsistent mode combination: {0}")]
    ModeConflict(String),
    #[error("inconsistent equality constraints (residual {residual:e})")]
    InconsistentEqualities { residual: f64 },
    #[error("implicit equation solve did not converge at step {step} (residual {residual:e})")]
    NoConvergence { step: usize, residual: f64 },
    #[error("reference data is constant")]
    ConstantData,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
