use thiserror::Error;

/// Errors raised by the simulator and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid ADC resolution: {0}")]
    InvalidBits(String),

    #[error("path delay {delay} out of range for a {len}-sample frame")]
    DelayOutOfRange { delay: usize, len: usize },

    #[error("unknown parameter tag `{0}`")]
    UnknownParameter(String),

    #[error("noise covariance is singular")]
    SingularCovariance,

    #[error("Fisher information matrix is singular")]
    SingularFim,

    #[error("position Jacobian is singular: user lies on the reference axis")]
    SingularGeometry,

    #[error("insufficient snapshots: {snapshots} < subarray length {subarray}")]
    InsufficientSnapshots { snapshots: usize, subarray: usize },

    #[error("at least one source must be requested")]
    NoSources,

    #[error("{sources} sources need a subarray longer than {subarray} elements")]
    TooManySources { sources: usize, subarray: usize },

    #[error("no AoA candidates available")]
    NoCandidates,

    #[error("all AoA candidates already consumed at path {0}")]
    CandidatesExhausted(usize),

    #[error("no metrics selected")]
    NoMetrics,

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("trial {trial} (snr {snr_db} dB, bits {bits}): {source}")]
    Trial {
        trial: u64,
        snr_db: f64,
        bits: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
