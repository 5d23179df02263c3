use thiserror::Error;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({i}, {j}) has non-positive or non-finite weight {w}")]
    NonPositiveWeight { i: usize, j: usize, w: f64 },
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("node {0} has zero degree; the normalized operator is undefined")]
    ZeroDegreeNode(usize),
    #[error("p = {0} is outside (1, 2]")]
    InvalidP(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("column {0} has zero p-norm")]
    ZeroColumn(usize),
    #[error("matrix columns are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("nearest-neighbour count {nn} must lie in [1, {max}]")]
    NNOutOfRange { nn: usize, max: usize },
    #[error("invalid point cloud: {0}")]
    InvalidPoints(String),
    #[error("retraction step is numerically rank deficient")]
    RankDeficientStep,
    #[error("only {distinct} distinct rows available for {k} clusters")]
    DegenerateRows { distinct: usize, k: usize },
    #[error("no k-means initialization produced {0} non-empty clusters")]
    AllCandidatesEmpty(usize),
    #[error("row {0} of the embedding is zero")]
    ZeroRow(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("cluster {0} has zero volume")]
    ZeroVolume(usize),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("rotation discretization requires the ncut objective")]
    RotationRequiresNCut,
    #[error("no p-level produced a valid partition")]
    NoValidPartition,
    #[error("invalid argument: {0}")]
    BadArgs(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::RankDeficientStep
            | Error::AllCandidatesEmpty(_)
            | Error::NoValidPartition
            | Error::ZeroColumn(_) => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
