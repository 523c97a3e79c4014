use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("record parse error at entry {index}: {reason}")]
    Record { index: usize, reason: String },

    #[error("raster format error: {0}")]
    Raster(String),

    #[error("patch extraction failed: {0}")]
    Extract(String),

    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },

    #[error("invalid label {0} (expected 0..=3)")]
    Label(i64),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("architecture error at layer {layer}: {detail}")]
    Architecture { layer: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("voting error: {0}")]
    Vote(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Attach a file path to an error raised while handling that file.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
