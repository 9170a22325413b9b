//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A rotation argument was not a unit quaternion.
    #[error("quaternion is not unit norm (|q| = {norm})")]
    InvalidRotation { norm: f64 },

    /// Series or vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An operation that requires data received none.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Timestamps must be strictly increasing.
    #[error("timestamps not strictly increasing at t = {t}")]
    NonIncreasingTime { t: f64 },

    /// Gap between consecutive samples exceeds the configured maximum,
    /// which signals dropped samples rather than a stream to bridge.
    #[error("sample gap of {dt} s at t = {t} exceeds maximum {max} s")]
    GapExceeded { t: f64, dt: f64, max: f64 },

    /// Invalid configuration or argument combination.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Not enough data to carry out the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Requested sampling rate cannot be produced from the available data.
    #[error("cannot resample: requested {requested} Hz from {available} Hz ground truth")]
    Resample { requested: f64, available: f64 },

    /// Trajectories share no timestamps within the association tolerance.
    #[error("no overlapping poses between trajectories")]
    NoOverlap,

    /// Alignment geometry is degenerate (collinear or coincident points).
    #[error("degenerate geometry: {0}")]
    RankDeficient(String),

    /// A detection report does not match the stream or library it is applied to.
    #[error("corrupted detection report: {0}")]
    CorruptReport(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A pipeline stage failed; the stage name is preserved for diagnostics.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
