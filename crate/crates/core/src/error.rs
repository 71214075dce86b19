use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported or malformed audio: {0}")]
    Format(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("noise signal is silent")]
    SilentNoise,
    #[error("clip has {len} samples but one frame needs {frame}")]
    TooShort { len: usize, frame: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at step {step}: {what}")]
    Divergence { step: usize, what: String },
    #[error("degenerate sequence: {0}")]
    DegenerateSequence(String),
    #[error("{usable} usable observations, at least {required} required")]
    InsufficientSamples { usable: usize, required: usize },
    #[error("no scorable clips in dataset")]
    EmptyDataset,
    #[error("corpus layout error at {path}: {msg}")]
    Layout { path: PathBuf, msg: String },
    #[error("too few clips to split: {0}")]
    TooFewClips(String),
    #[error("missing result cell: {0}")]
    MissingCell(String),
    #[error("result keys do not match: {0}")]
    KeyMismatch(String),
    #[error("clean accuracy is zero for {0}")]
    ZeroBaseline(String),
    #[error("{got} (randomness, mitigation) pairs, at least {required} required")]
    InsufficientPairs { got: usize, required: usize },
    #[error("report schema violation at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
