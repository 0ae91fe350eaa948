use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("covariance of path {path:?} is not positive definite")]
    SingularCovariance { path: Vec<usize> },

    #[error("non-finite ELBO term in {factor}")]
    NonFiniteElbo { factor: String },

    #[error("fit aborted at iteration {iteration}: non-finite ELBO")]
    Diverged {
        iteration: usize,
        trace: Box<crate::optim::FitTrace>,
    },

    #[error("not enough observations: n = {n}, need at least {needed}")]
    TooFewObservations { n: usize, needed: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("csv error at row {row}, column {col}: {msg}")]
    Csv { row: usize, col: usize, msg: String },

    #[error("constant rows cannot be standardized: {rows:?}")]
    ConstantRows { rows: Vec<usize> },

    #[error("no candidate architectures")]
    NoCandidates,

    #[error("all candidates failed to score")]
    AllCandidatesFailed,

    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    CsvParse(#[from] csv::Error),
}
