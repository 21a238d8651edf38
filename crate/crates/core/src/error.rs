use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the analysis stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: malformed array header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("{path}: unsupported element type {descr:?} (expected little-endian f32 or f64)")]
    UnsupportedDType { path: PathBuf, descr: String },

    #[error("{path}: expected a 2-D array, found shape {shape:?}")]
    NotTwoDimensional { path: PathBuf, shape: Vec<usize> },

    #[error("{}non-finite value at row {row}, column {col}", location(.path))]
    NonFiniteValue {
        path: Option<PathBuf>,
        row: usize,
        col: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed manifest: {reason}")]
    MalformedManifest { path: PathBuf, reason: String },

    #[error("{manifest}: layer {layer} refers to missing file {file}")]
    MissingLayerFile {
        manifest: PathBuf,
        layer: usize,
        file: PathBuf,
    },

    #[error("{manifest}: layer {layer} has {found} samples, expected {expected}")]
    InconsistentSampleCount {
        manifest: PathBuf,
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid matrix shape: {0}")]
    InvalidShape(String),

    #[error("row {row} is the zero vector and cannot be normalized")]
    ZeroRow { row: usize },

    #[error("k = {k} is out of range for N = {n} samples (need 1 <= k <= N-1)")]
    KTooLarge { k: usize, n: usize },

    #[error("cosine distance requires L2-normalized rows")]
    NotNormalized,

    #[error("sample counts differ: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("stimulus sets differ: {left} vs {right}")]
    StimulusSetMismatch { left: String, right: String },

    #[error("grid shapes differ: {left:?} vs {right:?}")]
    GridShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("results schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn location(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
