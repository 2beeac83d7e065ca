use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("linear solve failed: {dim}x{dim} matrix is numerically singular")]
    LinearSolveFailure { dim: usize },

    #[error("derivative unavailable: bracket word needs nesting depth {needed}, at most {available} supported")]
    DerivativeUnavailable { needed: usize, available: usize },

    #[error("bracket {word} is not in span of the input fields (relative residual {residual:.3e})")]
    SpanViolation { word: String, residual: f64 },

    #[error("state outside the admissible set R_k: {reason}")]
    RkViolation { reason: String },

    #[error("costate degenerate: {reason}")]
    CostateDegenerate { reason: String },

    #[error("singular control {value:.6} outside bounds [{lower}, {upper}]")]
    OutOfBounds { value: f64, lower: f64, upper: f64 },

    #[error("singular system degenerate for channel {channel}: {reason}")]
    DegenerateSystem { channel: usize, reason: String },

    #[error("trajectory carries no costates")]
    MissingCostates,

    #[error("schema error: {0}")]
    Schema(String),

    #[error("time column not strictly increasing at row {row} (t = {t})")]
    Monotonicity { row: usize, t: f64 },

    #[error("non-finite value at row {row}, column {column}")]
    NaN { row: usize, column: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
