use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("switching window exhausted: index {index} not stored in [{lo}, {hi}] and no generator")]
    WindowExhausted { index: i64, lo: i64, hi: i64 },

    #[error("time {t} lies outside the covered switching window [{lo}, {hi})")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("invalid switching sequence: {0}")]
    InvalidSequence(String),

    #[error("negative deviation {0} is not allowed here (delayed arguments only)")]
    NegativeDeviation(i64),

    #[error("empty testable range: {0}")]
    EmptyRange(String),

    #[error("insufficient window: {0}")]
    InsufficientWindow(String),

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("eigenvalue {re} + {im}i lies on the imaginary axis")]
    ImaginaryAxisEigenvalue { re: f64, im: f64 },

    #[error("dichotomy not certified: {0}")]
    NoEnvelope(String),

    #[error("truncation budget unreachable: {0}")]
    TruncationBudget(String),

    #[error("operator is not contractive (margin {margin:.6}): {detail}")]
    NonContractive { margin: f64, detail: String },

    #[error("iteration cap {cap} exceeded (last update {last_update:e})")]
    IterationCap { cap: usize, last_update: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("condition {condition} failed: {detail}")]
    ConditionFailed { condition: &'static str, detail: String },

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
