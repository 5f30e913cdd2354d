use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("variable index {index} out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },

    #[error("ambient dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("ambient dimension {0} exceeds supported maximum {max}", max = crate::MAX_DIM)]
    DimensionTooLarge(usize),

    #[error("non-finite evaluation at point {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("empty word")]
    EmptyWord,

    #[error("letter {letter} out of range for {m} generators")]
    LetterOutOfRange { letter: usize, m: usize },

    #[error("integrator did not reach tolerance {tol} within {max_substeps} substeps")]
    NoConvergence { tol: f64, max_substeps: usize },

    #[error("Newton iteration did not converge (target point likely outside box image)")]
    NewtonFailed,

    #[error("all determinants vanish at the sample point: Hormander condition violated")]
    HormanderViolation,

    #[error("no admissible path found within budget r = {budget}")]
    NoPathFound { budget: f64 },

    #[error("box distance out of range: no dyadic level up to r0 = {r0} succeeds")]
    OutOfRange { r0: f64 },

    #[error("scenario schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
