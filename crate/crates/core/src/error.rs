use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("displaced frame is singular: {0}")]
    SingularFrame(&'static str),

    #[error("approximation ratio is singular: delta_b equals delta_c")]
    SingularCondition,

    #[error("degenerate cat branch: {0}")]
    DegenerateBranch(String),

    #[error("conditional state undefined: projection probability {0:e} below 1e-12")]
    UndefinedConditionalState(f64),

    #[error("truncation too small: norm deficit {deficit:e} at dimension {dim}")]
    Truncation { deficit: f64, dim: usize },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("step size failure: {0}")]
    StepSize(String),

    #[error("numerical diagnostic failed: {0}")]
    Diagnostic(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
