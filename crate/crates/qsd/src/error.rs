use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QsdError {
    #[error("class is not narrow: it is not in the image of multiplication by e(E^v)")]
    NotNarrow,
    #[error("ambient pairing is degenerate on the quotient by ker(e(E))")]
    AmbientDegenerate,
    #[error("truncation mismatch: {left} vs {right}")]
    TruncationMismatch { left: usize, right: usize },
    #[error("negative lambda power at q^{q_degree} z^{z_exp} (lambda^{lambda_exp})")]
    NegativeLambdaPower {
        q_degree: usize,
        z_exp: i32,
        lambda_exp: i32,
    },
    #[error("matrix is not unipotent: {0}")]
    NotUnipotent(String),
    #[error("substitution overflow: {0}")]
    SubstitutionOverflow(String),
    #[error("odd degree offset {0} in grading operator")]
    OddDegree(i64),
    #[error("bundle is not convex: degrees {0:?}")]
    NonConvex(Vec<i64>),
    #[error("mirror map out of range: {0}")]
    MirrorMapOutOfRange(String),
    #[error("narrow subspace is not closed: {0}")]
    NarrowNotClosed(String),
    #[error("flavor mismatch: {0}")]
    FlavorMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QsdError>;

impl QsdError {
    /// Errors that put an input outside the supported range rather than
    /// signalling a failed check.
    pub fn is_scope(&self) -> bool {
        matches!(
            self,
            QsdError::NonConvex(_) | QsdError::MirrorMapOutOfRange(_) | QsdError::AmbientDegenerate
        )
    }
}
