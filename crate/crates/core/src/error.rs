use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty manifest")]
    EmptyManifest,
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("unresolvable column `{column}` in {}", .path.display())]
    UnresolvedColumn { path: PathBuf, column: String },
    #[error("non-numeric cell {value:?} in {} (record {record}, column `{column}`)", .path.display())]
    NonNumeric {
        path: PathBuf,
        record: usize,
        column: String,
        value: String,
    },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("column length mismatch: expected {expected} rows, got {got}")]
    RaggedColumns { expected: usize, got: usize },

    #[error("degenerate spread; use fixed_count")]
    DegenerateSpread,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("bin count {0} exceeds the supported maximum")]
    TooManyBins(usize),
    #[error("invalid binning rule `{0}` (expected fd, scott or a positive integer)")]
    InvalidRule(String),

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),
    #[error("alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error("joint state budget exceeded ({estimated} > {budget} entries); use the Chow-Liu approximation")]
    BudgetExceeded { estimated: u128, budget: usize },
    #[error("no complete rows across the selected channels")]
    NoCompleteRows,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("undefined correlation: constant input")]
    UndefinedCorrelation,

    #[error("need at least {needed} channels, got {got}")]
    TooFewChannels { needed: usize, got: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("validation requires n ≥ 2")]
    ValidationTooSmall,
    #[error("validation supports at most 3 channels, got {0}")]
    ValidationTooLarge(usize),

    #[error("invalid subset bounds: min {min}, max {max}, channels {n}")]
    InvalidBounds { min: usize, max: usize, n: usize },
    #[error("invalid bin grid: {0}")]
    InvalidGrid(String),

    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("cannot parse duration `{0}`")]
    InvalidDuration(String),

    #[error("joint expansion too large: {0} states")]
    ExpansionTooLarge(u128),

    #[error("unsupported report schema `{0}`")]
    UnsupportedSchema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("manifest parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
