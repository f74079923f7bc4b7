//! Error families with a fixed exit-code contract.
//!
//! Exit 2: the configuration cannot be interpreted (bad JSON, missing or
//! inconsistent fields, out-of-range settings). Exit 3: the data cannot
//! be read as declared (missing columns, unparsable cells, unknown
//! categories). Exit 4: the computation itself failed on well-formed
//! inputs (zero cells, singular systems, non-convergence). Every failure
//! is also emitted as a JSON object so callers never parse prose.

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn family(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// The machine-readable form written to stderr before exiting.
    pub fn as_json(&self) -> String {
        #[derive(Serialize)]
        struct ErrorBody<'a> {
            family: &'a str,
            exit_code: i32,
            message: String,
        }
        #[derive(Serialize)]
        struct ErrorObject<'a> {
            schema: u32,
            error: ErrorBody<'a>,
        }
        serde_json::to_string(&ErrorObject {
            schema: 1,
            error: ErrorBody {
                family: self.family(),
                exit_code: self.exit_code(),
                message: self.to_string(),
            },
        })
        .expect("error object serialization cannot fail")
    }
}

/// Sort a library error into the exit-code families.
pub fn classify(err: pncrit_core::Error) -> CliError {
    use pncrit_core::Error as E;
    let msg = err.to_string();
    match err {
        E::AlphaOutOfRange(_)
        | E::DeltaNegative(_)
        | E::InvalidConfig(_)
        | E::DimensionMismatch(_)
        | E::CapExceeded { .. } => CliError::Config(msg),
        E::MissingColumn(_)
        | E::NonNumericCell { .. }
        | E::UnknownCategory { .. }
        | E::ValueOutOfDomain { .. }
        | E::NNotPositive => CliError::Data(msg),
        E::ZeroCell(_)
        | E::NotPd { .. }
        | E::SingularJacobian(_)
        | E::MaxIterExceeded(_)
        | E::NonFiniteDerivative(_)
        | E::DegenerateProposal { .. }
        | E::TooManyDiscarded { .. }
        | E::BetaMomentMatchInfeasible { .. }
        | E::EmptyBasis
        | E::MissingTensor(_)
        | E::PsiUnavailable(_)
        | E::SamplerUnavailable
        | E::NoReference => CliError::Numeric(msg),
    }
}

/// Classify an error raised while turning configuration values into a
/// model: whatever the library says, the root cause is the config file.
pub fn classify_as_config(err: pncrit_core::Error) -> CliError {
    CliError::Config(err.to_string())
}
