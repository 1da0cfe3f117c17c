use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: String, detail: String },

    #[error("invalid layer `{layer}`: {detail}")]
    InvalidLayer { layer: String, detail: String },

    #[error("input too small for {what}: need at least {required}, got {actual}")]
    InputTooSmall {
        what: String,
        required: usize,
        actual: usize,
    },

    #[error("{0}")]
    Usage(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("non-finite loss at iteration {iteration} (lr {lr:e})")]
    NonFiniteLoss { iteration: usize, lr: f64 },

    #[error("weight file: {0}")]
    WeightFormat(String),

    #[error("weight import failed at layer `{layer}`: {detail}")]
    WeightImport { layer: String, detail: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image decode {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
