//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building models, estimating moments,
/// or evaluating the risk expansion.
///
/// Variants are grouped by origin: data problems (`ZeroCell`,
/// `DimensionMismatch`, ...), numerical failures (`NotPd`,
/// `SingularJacobian`, `NonFiniteDerivative`, ...), and plain misuse
/// (`AlphaOutOfRange`, `CapExceeded`, ...).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix {name} is not positive definite ({detail})")]
    NotPd { name: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFiniteDerivative(String),

    #[error("sample size must be positive")]
    NNotPositive,

    #[error("cell {0} has a zero count; the maximum-likelihood estimate does not exist")]
    ZeroCell(usize),

    #[error("no exact sampler for this model; use the Markov-chain sampler")]
    SamplerUnavailable,

    #[error("the cumulant generating function of this model has no closed form; {0}")]
    PsiUnavailable(&'static str),

    #[error("Newton iteration did not converge within {0} steps")]
    MaxIterExceeded(usize),

    #[error("singular Jacobian in Newton step: {0}")]
    SingularJacobian(String),

    #[error("model has no reference sampler to initialize from")]
    NoReference,

    #[error("proposal degenerated: acceptance rate {rate:.4} for coordinate {coord} after adaptation")]
    DegenerateProposal { coord: usize, rate: f64 },

    #[error("moment tensor {0} is required but was not supplied")]
    MissingTensor(&'static str),

    #[error("dimension p={p} exceeds the cap {cap} of this engine")]
    CapExceeded { p: usize, cap: usize },

    #[error("alpha must lie strictly inside (0, 0.5); got {0}")]
    AlphaOutOfRange(f64),

    #[error("divergence bound must be nonnegative; got {0}")]
    DeltaNegative(f64),

    #[error("cannot moment-match a Beta density for column {col}: mean {mean}, variance {var}")]
    BetaMomentMatchInfeasible { col: usize, mean: f64, var: f64 },

    #[error("basis is empty after correlation filtering")]
    EmptyBasis,

    #[error("column {0:?} missing from the data header")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} in column {column} at data row {row}")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("unknown category {value:?} in column {column} at data row {row}")]
    UnknownCategory {
        column: String,
        row: usize,
        value: String,
    },

    #[error("value {value} in column {column} at data row {row} is outside the open unit interval required by the Beta reference")]
    ValueOutOfDomain {
        column: usize,
        row: usize,
        value: f64,
    },

    #[error("{discarded} of {total} replications were degenerate (more than {limit_percent}%)")]
    TooManyDiscarded {
        discarded: usize,
        total: usize,
        limit_percent: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
