use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "layer {index} ({layer}) of stack `{stack}` produces an empty extent from input {input:?}"
    )]
    ExtentUnderflow {
        stack: String,
        index: usize,
        layer: String,
        input: [usize; 3],
    },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("class value {value} at pixel (x={x}, y={y}) is out of range for {classes} classes")]
    ClassOutOfRange {
        x: usize,
        y: usize,
        value: usize,
        classes: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
