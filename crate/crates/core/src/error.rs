use thiserror::Error;

/// Errors raised by the estimators, the classifier and the simulation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at or below threshold)")]
    NotPositiveDefinite { pivot: usize },

    #[error("argument outside its domain: {0}")]
    DomainError(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("column {column} has zero MAD; drop or perturb the variable")]
    ZeroScale { column: usize },

    #[error("too few observations: n = {n} must exceed p + 1 = {}", p + 1)]
    TooFewObservations { n: usize, p: usize },

    #[error("initial estimator {0} is degenerate and cannot be repaired")]
    DegenerateStart(&'static str),

    #[error("every initial estimator degenerated")]
    AllStartsDegenerate,

    #[error("too few inliers after reweighting: {count} (need more than p = {p})")]
    TooFewInliers { count: usize, p: usize },

    #[error("blocks too small: n = {n} cannot fill {q} blocks of at least {min} rows")]
    BlocksTooSmall { n: usize, q: usize, min: usize },

    #[error("class {label} is empty after trimming outliers")]
    EmptyClassAfterTrim { label: u32 },

    #[error("unknown class label {0}")]
    UnknownClass(u32),

    #[error("configuration error: {0}")]
    ConfigError(String),

    #[error("class {class} carries no planted noise; alpha is undefined")]
    ZeroNoise { class: u32 },

    #[error("class {label}: {source}")]
    InClass {
        label: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {rep}: {source}")]
    InReplication {
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips class/replication annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::InClass { source, .. } | Error::InReplication { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::NotPositiveDefinite { .. }
                | Error::ZeroScale { .. }
                | Error::DegenerateStart(_)
                | Error::AllStartsDegenerate
                | Error::TooFewInliers { .. }
                | Error::EmptyClassAfterTrim { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
