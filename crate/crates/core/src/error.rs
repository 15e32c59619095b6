use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {requested} unsupported (maximum {max})")]
    UnsupportedDimension { requested: usize, max: usize },

    #[error("discrepancy oracle limited to {limit}; got s = {s}, N = {n}")]
    OracleLimit { s: usize, n: usize, limit: String },

    #[error("coordinate {value} outside [0, 1) on axis {axis}")]
    Domain { axis: usize, value: f64 },

    #[error("Hilbert index {index} out of range for d = {d}, depth = {depth}")]
    IndexOutOfRange { index: u128, d: usize, depth: u32 },

    #[error("non-finite input: {0}")]
    Numeric(String),

    #[error("covariance is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("all potentials are zero (or non-finite) at t = {t}")]
    DegenerateWeights { t: usize },

    #[error("backward kernel degenerate at t = {t}, particle {m}: every weight underflows")]
    DegenerateKernel { t: usize, m: usize },

    #[error("uniforms must be nondecreasing (violated at position {position})")]
    Unsorted { position: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("trajectory dimension {dim} at t = {t} exceeds the Hilbert capacity; use a backward smoother")]
    TrajectoryDimensionCap { t: usize, dim: usize },

    #[error("unknown test function `{0}`")]
    UnknownTestFunction(String),

    #[error("record schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("degenerate gain at t = {t}: QMC mean squared error is zero")]
    DegenerateGain { t: usize },

    #[error("missing stored reference file {0}")]
    MissingReference(PathBuf),

    #[error("replication with seed {seed} failed: {source}")]
    Replication {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(csv::Error),
}

/// I/O failures inside the CSV layer surface as [`Error::Io`].
impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!("is_io_error implies an Io kind"),
            }
        } else {
            Error::Csv(e)
        }
    }
}
