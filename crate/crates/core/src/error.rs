use std::path::PathBuf;

use crate::data_model::ActivityLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
///
/// The variants line up with the command-line exit-code contract through
/// [`Error::exit_code`]: numeric divergence maps to 3, everything else that
/// reaches the CLI is a data error (2). Usage errors never become an `Error`.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("recording has {frames} frames, shorter than the window length {window_len}")]
    EmptyRecording { frames: usize, window_len: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("signal of length {len} is shorter than the STFT window {win_len}")]
    SignalTooShort { len: usize, win_len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("class {0} has no training windows left")]
    EmptyClass(ActivityLabel),

    #[error("convergence trace is empty")]
    EmptyTrace,

    #[error("synthetic window rejected from the evaluation split")]
    SyntheticInTest,

    #[error("archive checksum mismatch")]
    Checksum,

    #[error("unsupported archive format version {found} (this build reads {supported})")]
    Version { found: u32, supported: u32 },

    #[error("malformed archive: {0}")]
    Archive(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}
