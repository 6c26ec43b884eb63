//! Crate-wide error type.

use std::path::PathBuf;

use crate::volume::{Dims, Voxel};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(Dims, Dims),

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("voxel ({}, {}, {}) out of bounds for {1}", .0.x, .0.y, .0.z)]
    OutOfBounds(Voxel, Dims),

    #[error("empty mask: {0}")]
    EmptyMask(&'static str),

    #[error("empty sampling support: {0}")]
    EmptySupport(&'static str),

    #[error("voxel ({}, {}, {}) is not inside the label", .0.x, .0.y, .0.z)]
    NotInLabel(Voxel),

    #[error("uncertainty maps unsupported by the configured predictor")]
    UncertaintyUnsupported,

    #[error("phantom placement budget exhausted after {attempts} attempts; reduce lesion count or radii")]
    PlacementBudget { attempts: u32 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("mismatched study sets: {0}")]
    StudyMismatch(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json { context: context.into(), source }
    }

    /// Process exit code for the CLI: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::MissingFile(_) => 2,
            _ => 1,
        }
    }
}
