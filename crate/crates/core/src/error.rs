use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix must be square with n >= 1 (got {rows}x{cols})")]
    BadShape { rows: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: ‖M - M*‖ = {deviation:e} exceeds {tol:e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not a projection: ‖P² - P‖ = {deviation:e} exceeds {tol:e}")]
    NotProjection { deviation: f64, tol: f64 },

    #[error("Schatten exponent must satisfy p >= 1 (got {0})")]
    InvalidExponent(f64),

    #[error("interval endpoint {endpoint} lies within {tol:e} of eigenvalue {eigenvalue}")]
    AmbiguousInterval {
        endpoint: f64,
        eigenvalue: f64,
        tol: f64,
    },

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("numerical failure in {context}: residual {residual:e}")]
    Numerical {
        context: &'static str,
        residual: f64,
    },

    #[error("zero vector is not allowed here")]
    ZeroVector,

    #[error("budget must be positive and finite (got {0})")]
    InvalidBudget(f64),

    #[error("algebra is not abelian (commutator norm {0:e})")]
    NotAbelian(f64),

    #[error("operator does not lie in the algebra (residual {0:e})")]
    NotInAlgebra(f64),

    #[error("{what}: gave up after {attempts} attempts")]
    RetryExhausted { what: &'static str, attempts: usize },

    #[error("inconsistent algebra structure: {0}")]
    Inconsistent(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "no cyclic vector: Wedderburn block (n={n}, m={m}) has multiplicity exceeding its size"
    )]
    NoCyclicVector { n: usize, m: usize },

    #[error("rank surrogate violated: {0}")]
    RankSurrogate(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Structural errors are violations of a construction's hypotheses (as
    /// opposed to malformed input).
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Error::NoCyclicVector { .. }
                | Error::RankSurrogate(_)
                | Error::Precondition(_)
                | Error::NotInAlgebra(_)
                | Error::NotAbelian(_)
        )
    }
}
