use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular configuration: particles {i} and {j} coincide")]
    SingularConfiguration { i: usize, j: usize },

    #[error("blow-up at t = {t}: d_min = {d_min:e} is at or below the floor {floor:e}")]
    BlowUp { t: f64, d_min: f64, floor: f64 },

    #[error("weights must be nonnegative and sum to one (sum = {sum})")]
    WeightNormalization { sum: f64 },

    #[error("brute force refused: m = {0} exceeds 8")]
    TooLarge(usize),

    #[error("sampling grids differ: {0}")]
    GridMismatch(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
