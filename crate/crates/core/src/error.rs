use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: expected {expected} feature columns, found {found}")]
    InconsistentFeatureCount {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("dataset contains no individuals")]
    EmptyDataset,
    #[error("duplicate individual id `{0}`")]
    DuplicateId(String),
    #[error("padding cap {cap} is smaller than the longest series ({needed})")]
    CapTooSmall { cap: usize, needed: usize },
    #[error("split fraction {frac} leaves individual `{id}` (T={t_len}) without train or test points")]
    DegenerateSplit { id: String, t_len: usize, frac: f64 },
    #[error("cluster label {label} for `{id}` outside [0, {k})")]
    UnknownCluster { id: String, label: i64, k: usize },
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("k={k} exceeds the number of individuals ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("ground-truth spec describes {spec} clusters, config asks for {config}")]
    SpecClusterMismatch { spec: usize, config: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("every column of the softmax row is masked")]
    AllMaskedRow,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("loss or gradient is not finite")]
    NonFiniteLoss,
    #[error("mask has {0} valid time-points, at least 2 required")]
    MaskTooSparse(usize),

    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("individual `{0}` has no cluster label")]
    MissingId(String),
    #[error("cluster {cluster} has {size} member(s), at least 2 required")]
    TinyCluster { cluster: usize, size: usize },
    #[error("alignment error: {0}")]
    AlignmentError(String),

    #[error("attention matrix has no valid query rows")]
    NoValidRows,
    #[error("{0} valid time-points, at least 3 required")]
    TooFewPoints(usize),
    #[error("bad feature index pair ({a}, {b}) for V={v}")]
    BadFeatureIndex { a: usize, b: usize, v: usize },
    #[error("unknown individual `{0}`")]
    UnknownId(String),
    #[error("unsupported checkpoint version {0}")]
    CheckpointVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::AllMaskedRow
            | Error::ShapeMismatch(_)
            | Error::LengthMismatch { .. }
            | Error::NonFiniteLoss
            | Error::MaskTooSparse(_) => ErrorKind::Numeric,
            Error::Io(_) => ErrorKind::Io,
            _ => ErrorKind::Data,
        }
    }
}
