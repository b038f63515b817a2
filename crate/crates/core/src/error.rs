//! Error and result types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::nifti::Datatype;
use crate::volume::Modality;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),

    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),

    #[error("voxel payload too short: dims imply {expected} voxels, payload holds {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("only 3-D volumes are supported: got {ndim}-D with a non-singleton trailing dim")]
    UnsupportedDimensionality { ndim: usize },

    #[error("value {value} is not representable as {datatype} without clamping")]
    RangeOverflow { value: f64, datatype: Datatype },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("invalid window: lo={lo} must be strictly below hi={hi}")]
    InvalidWindow { lo: f64, hi: f64 },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("modality mismatch: expected {expected}, got {actual}")]
    ModalityMismatch {
        expected: Modality,
        actual: Modality,
    },

    #[error("input values outside [0,1]: observed range [{min}, {max}]")]
    OutOfRangeInput { min: f64, max: f64 },

    #[error("no foreground voxels")]
    EmptyForeground,

    #[error("degenerate statistics: foreground standard deviation is zero")]
    DegenerateStats,

    #[error("slice index {index} out of range for axis of length {len}")]
    SliceOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("subject {subject}: missing modality {modality}")]
    MissingModality { subject: String, modality: String },

    #[error("no prediction file found for subject {0}")]
    MissingPrediction(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
