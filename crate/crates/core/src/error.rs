use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the library.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto coarse exit categories with [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },

    #[error("no features")]
    NoFeatures,

    #[error("degenerate embedding")]
    DegenerateEmbedding,

    #[error("missing embedding for domain `{0}`")]
    MissingDomain(String),

    #[error("ragged embedding dimensions: `{domain}` has {found}, expected {expected}")]
    RaggedDimensions {
        domain: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty vector")]
    EmptyVector,

    #[error("empty target vocabulary")]
    EmptyVocabulary,

    #[error("incomparable profiles: `{left}` and `{right}` were built under different settings")]
    IncomparableProfiles { left: String, right: String },

    #[error("undefined transport ratio (zero-performance source)")]
    ZeroSource,

    #[error("no target scores")]
    NoTargets,

    #[error("variation undefined for fewer than 2 targets")]
    TooFewTargets,

    #[error("mean transport ratio is zero")]
    ZeroMean,

    #[error("incomparable metrics: `{0}` and `{1}`")]
    IncomparableMetrics(String, String),

    #[error("duplicate score entry {0}")]
    DuplicateScore(String),

    #[error("invalid score {score} for {key}: {reason}")]
    InvalidScore {
        key: String,
        score: f64,
        reason: &'static str,
    },

    #[error("missing score entry {0}")]
    MissingKey(String),

    #[error("underdetermined: need at least 3 points, got {0}")]
    Underdetermined(usize),

    #[error("no predictor variation")]
    NoPredictorVariation,

    #[error("no points")]
    NoPoints,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad configuration or invocation.
    Usage,
    /// Unreadable, malformed or inconsistent input data.
    Data,
    /// A computation was numerically undefined.
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Config(_) | NoTargets | IncomparableMetrics(..) | IncomparableProfiles { .. } => ErrorCategory::Usage,
            ZeroSource | TooFewTargets | ZeroMean | DegenerateEmbedding | Numerical(_) | Underdetermined(_)
            | NoPredictorVariation => ErrorCategory::Numerical,
            _ => ErrorCategory::Data,
        }
    }
}
