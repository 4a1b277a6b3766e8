use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the {domain} domain")]
    PointOutOfDomain { x: i64, y: i64, domain: String },

    #[error("element {value} is outside [1, {n}]")]
    ElementOutOfRange { value: i64, n: i64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("table shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not a skew corner of the lifted instance: {0}")]
    NotALiftedCorner(String),

    #[error("no regular dilate found among {} candidate scales", candidates.len())]
    NoRegularDilate { candidates: Vec<f64> },

    #[error("translate search exhausted after {scanned} candidates")]
    TranslateExhausted { scanned: usize },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
