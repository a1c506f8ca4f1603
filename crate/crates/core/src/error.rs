use thiserror::Error;

use crate::linalg::CMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch in {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("positivity violated: minimum eigenvalue {min_eigenvalue:.3e}")]
    Positivity { min_eigenvalue: f64 },

    #[error("index {index} out of range for {len} channels")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid signature: {0}")]
    InvalidSignature(String),

    #[error("gauge matrix is not pseudo-unitary at t = {t} (residual {residual:.3e})")]
    PseudoUnitarity { t: f64, residual: f64 },

    #[error("generator invariance violated (residual {residual:.3e})")]
    GaugeInvariance { residual: f64 },

    #[error("no null vector within tolerance (smallest singular value {smallest:.3e})")]
    NoNullVector { smallest: f64 },

    #[error("null space is {} dimensional; select a fixed point from the returned basis", basis.len())]
    DegenerateNullSpace { basis: Vec<CMatrix> },

    #[error("cross-check failed for {what}: discrepancy {discrepancy:.3e}")]
    CrossCheck { what: String, discrepancy: f64 },

    #[error("missing trajectory context: {0}")]
    MissingContext(String),

    #[error("state is rank deficient beyond the logarithm clamp")]
    RankDeficient,

    #[error("support of the first state is not contained in the support of the reference")]
    SupportViolation,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("trace drift {drift:.3e} exceeds tolerance")]
    TraceDrift { drift: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("machine does not operate as an engine (hot heat {q_hot:.3e} <= 0)")]
    NotEngine { q_hot: f64 },

    #[error("ledger does not cover a closed cycle")]
    NonCyclic,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("expression error at {position}: {message}")]
    Expression { position: usize, message: String },
}

impl Error {
    /// Failures of the numerical integration itself, as opposed to
    /// failed cross-checks or malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Positivity { .. }
                | Error::TraceDrift { .. }
                | Error::NonFinite(_)
                | Error::RankDeficient
                | Error::SupportViolation
                | Error::NoNullVector { .. }
                | Error::DegenerateNullSpace { .. }
        )
    }

    pub fn is_cross_check(&self) -> bool {
        matches!(
            self,
            Error::CrossCheck { .. } | Error::GaugeInvariance { .. }
        )
    }
}
