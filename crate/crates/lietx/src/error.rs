use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grading violation: {0}")]
    Grading(String),
    #[error("resonant divisor at order {order}: {detail}")]
    Resonance { order: u32, detail: String },
    #[error("symmetry violation at order {order} in the {block} block")]
    Symmetry { order: u32, block: &'static str },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-invertible linear part")]
    NonInvertibleLinear,
    #[error("invalid map specification: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;
