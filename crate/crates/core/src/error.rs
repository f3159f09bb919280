use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FvError {
    #[error("invalid bath: {0}")]
    InvalidBath(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error(
        "Fock truncation too small for mode {mode}: top level population {population:.3e} \
         at n_fock = {n_fock} (must be < {limit:.0e})"
    )]
    FockLeakage {
        mode: usize,
        n_fock: usize,
        population: f64,
        limit: f64,
    },

    #[error("total Hilbert space dimension {required} exceeds the cap of {cap}")]
    DimensionCap { required: usize, cap: usize },

    #[error("path sum needs {required} path pairs but the budget is {budget}")]
    PathBudget { required: u128, budget: u128 },

    #[error("correlator not available for the requested event tuple: {0}")]
    MissingCorrelator(String),

    #[error("cumulant order {0} is outside the implemented range 1..=4")]
    UnsupportedOrder(usize),

    #[error("times must be strictly decreasing, got {0:?}")]
    UnorderedTimes(Vec<f64>),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for FvError {
    fn from(e: csv::Error) -> Self {
        FvError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FvError>;
