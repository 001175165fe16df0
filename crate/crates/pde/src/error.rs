use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("solver produced a non-finite value at step {step}")]
    Unstable { step: usize },
    #[error("bad length: {0}")]
    BadLength(String),
    #[error("degenerate field: max equals min")]
    DegenerateField,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Core(#[from] waveformer_core::Error),
}
