use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("resolvent symbol is singular at z = {re} + {im}i")]
    SingularSymbol { re: f64, im: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("box side {l} is smaller than 4 x support radius {r}")]
    BoxTooSmall { l: f64, r: f64 },
    #[error("potential has empty support")]
    EmptySupport,
    #[error("omega field does not cover node {node}")]
    CoverageGap { node: usize },
    #[error("sparse decomposition exceeded {cap} families (layer {layer}, {centers} centers, gamma {gamma})")]
    SparseOverflow {
        cap: usize,
        layer: i32,
        centers: usize,
        gamma: f64,
    },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("matrix dimension {dim} exceeds dense budget {budget}")]
    OverBudget { dim: usize, budget: usize },
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("nonpositive data at index {0}")]
    NonPositive(usize),
    #[error("support of the potential exceeds radius {0}")]
    SupportViolation(f64),
    #[error("tabulated potential: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
