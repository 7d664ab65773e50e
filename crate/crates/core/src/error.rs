use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid Pauli string {0:?}")]
    ParsePauli(String),

    #[error("invalid stabilizer group: {0}")]
    InvalidStabilizer(String),

    #[error("enumeration budget exceeded: n = {n}, supported up to {max}")]
    EnumerationBudget { n: usize, max: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("exact evaluation unavailable: {0}")]
    ExactUnavailable(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("query returned {value}, outside [-1, 1]")]
    UnboundedQuery { value: f64 },

    #[error("adversary answered {answer} for truth {truth} at tolerance {tau}")]
    AdversaryOutOfBand { truth: f64, answer: f64, tau: f64 },

    #[error("distribution mismatch: {0}")]
    DistributionMismatch(String),

    #[error("promise violated on qubit {qubit}: answer {answer} is inside the dead zone")]
    PromiseViolated { qubit: usize, answer: f64 },

    #[error("linear system over GF(2) is inconsistent")]
    Inconsistent,

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("noise rate {eta} leaves no tolerance budget for requested tolerance {tau}")]
    ToleranceExhausted { tau: f64, eta: f64 },

    #[error("hypothesis check failed: {0}")]
    HypothesisFailed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
