use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported/corrupt WAV {}: {reason}", path.display())]
    UnsupportedWav { path: PathBuf, reason: String },

    #[error("WAV file {} contains no audio samples", .0.display())]
    EmptyAudio(PathBuf),

    #[error("cannot write {}: {reason}", path.display())]
    Unwritable { path: PathBuf, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("signal of {len} samples is shorter than one frame of {frame_length}")]
    SignalTooShort { len: usize, frame_length: usize },

    #[error("{frames} frames cannot be split into {blocks} blocks")]
    TooFewFrames { frames: usize, blocks: usize },

    #[error("solver diverged: non-finite cost at step size {step_size:e}")]
    Diverged { step_size: f64 },

    #[error("sample-rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("source {source_index} and microphone {mic_index} coincide")]
    CoincidentPositions { source_index: usize, mic_index: usize },

    #[error("invalid room geometry: {0}")]
    InvalidGeometry(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("at rt60 {rt60_ms} ms: {source}")]
    Sweep { rt60_ms: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
