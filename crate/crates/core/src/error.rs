use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward root is not a scalar (shape {0:?})")]
    NotScalar(Vec<usize>),
    #[error("backward root does not belong to this tape")]
    DetachedRoot,
    #[error("unknown wavelet `{0}` (supported: db2, db3, db4, db5, db6)")]
    UnknownWavelet(String),
    #[error("extent {extent} is not divisible by 2^{levels}")]
    BadLength { extent: usize, levels: usize },
    #[error("positional encoding width {0} is odd")]
    OddWidth(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("trajectory has {time} frames, need at least {needed}")]
    TooShort { time: usize, needed: usize },
    #[error("training loss became non-finite at epoch {epoch}, batch {batch}")]
    EarlyNaN { epoch: usize, batch: usize },
    #[error("rollout diverged at step {step}")]
    RolloutDiverged { step: usize },
    #[error("misaligned inputs: {0}")]
    Misaligned(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}
