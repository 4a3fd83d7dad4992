//! Error type shared by all core modules.

use std::path::PathBuf;

/// Errors produced by cloud I/O, registration, and attack planning.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("truncated scan file {path}: {len} bytes is not a multiple of 16")]
    TruncatedScan { path: PathBuf, len: u64 },

    #[error("non-finite coordinate at point {index}")]
    NonFinitePoint { index: usize },

    #[error("pose line {line}: expected 12 values, found {found}")]
    MalformedPoseLine { line: usize, found: usize },

    #[error("pose line {line}: rotation has non-positive determinant after projection")]
    ImproperRotation { line: usize },

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("need at least {needed} correspondences, have {have}")]
    TooFewCorrespondences { needed: usize, have: usize },

    #[error("no grid cell reached the minimum point count")]
    EmptyGrid,

    #[error("malformed attack plan: {0}")]
    MalformedPlan(String),
}

pub type Result<T> = std::result::Result<T, Error>;
