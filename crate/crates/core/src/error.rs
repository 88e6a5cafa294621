use thiserror::Error;

use crate::algebra::Monomial;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("monomial {0} exceeds the multidegree bound")]
    DegreeOverflow(String),

    #[error("moment of {0} is not available")]
    MissingMoment(String),

    #[error("moment of {0} depends on unresolved parameters")]
    UnresolvedParameter(String),

    #[error("product of two parametric expressions is not affine")]
    NonAffineProduct,

    #[error("multinomial coefficient overflows u64")]
    MultinomialOverflow,

    #[error("matrix is singular or too ill-conditioned (condition {0:e})")]
    Singular(f64),

    #[error("no invertible {0}x{0} Hankel block with fully known entries")]
    NoInvertibleBlock(usize),

    #[error("points do not determine the weights (rank {rank} < {expected})")]
    RankDeficientSystem { rank: usize, expected: usize },

    #[error("coordinate {0} cannot be recovered")]
    MissingCoordinate(String),

    #[error("lifted term {0} has a vanishing homogenizing coordinate")]
    NonAffineTerm(usize),

    #[error("operation unsupported for this shape: {0}")]
    Unsupported(String),

    #[error("zero tensor")]
    ZeroTensor,

    #[error("no decomposition found up to rank {max_rank} (best residual {best_residual:e}): {diagnostics}")]
    NotFound {
        max_rank: usize,
        best_residual: f64,
        diagnostics: String,
    },
}

impl Error {
    pub(crate) fn degree_overflow(m: &Monomial) -> Self {
        Error::DegreeOverflow(m.to_string())
    }

    pub(crate) fn missing(m: &Monomial) -> Self {
        Error::MissingMoment(m.to_string())
    }
}
