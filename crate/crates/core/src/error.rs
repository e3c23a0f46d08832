use thiserror::Error;

/// Errors raised by the library. CLI exit codes are derived from these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {size} points per axis is too small for lattice nmax={nmax} (need at least {needed})")]
    GridTooSmall { size: usize, nmax: usize, needed: usize },

    #[error("field is not Hermitian-symmetric: |c(-k) - conj c(k)| = {deviation:e} at mode {mode:?}")]
    NotHermitian { mode: Vec<i32>, deviation: f64 },

    #[error("rank or lattice mismatch: {0}")]
    Mismatch(String),

    #[error("backend mismatch: {0}")]
    Backend(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Kasner exponents must satisfy sum p = 1 and sum p^2 = 1 (got sum p = {sum:.15}, sum p^2 = {sum_sq:.15})")]
    KasnerExponents { sum: f64, sum_sq: f64 },

    #[error("singular metric: {0}")]
    SingularMetric(String),

    #[error("unsupported slice for this operation: {0}")]
    UnsupportedSlice(String),

    #[error("operation needs pointwise values but the input is distributional: {0}")]
    Distributional(String),

    #[error("time {t} is outside the admissible range {range}")]
    TimeOutOfRange { t: f64, range: String },

    #[error("snapshot format error ({kind}): {detail}")]
    Snapshot { kind: SnapshotFault, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Category of a malformed snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFault {
    BadMagic,
    Truncated,
    CountMismatch,
    Metadata,
}

impl std::fmt::Display for SnapshotFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SnapshotFault::BadMagic => "bad magic",
            SnapshotFault::Truncated => "truncated",
            SnapshotFault::CountMismatch => "count mismatch",
            SnapshotFault::Metadata => "metadata",
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
