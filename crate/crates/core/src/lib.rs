//! Clinically informed CT preprocessing for stroke imaging.
//!
//! The crate provides, as a library plus the `ctprep` batch CLI:
//!
//! - NIfTI-1 volume I/O, plain or gzipped ([`nifti`]);
//! - geometry-aware voxel arithmetic and mask algebra ([`ops`]);
//! - clinical intensity windowing, foreground histogram equalization, and
//!   percentile/z-score baseline normalization ([`preprocess`]);
//! - 3-D connected components ([`components`]);
//! - CTA−NCCT subtraction vessel segmentation ([`vessel`]);
//! - lesion segmentation metrics: Dice, AVD, lesion-wise F1, ALCD
//!   ([`metrics`]);
//! - slice rendering for QC ([`render`]);
//! - manifest-driven batch orchestration ([`pipeline`]).

pub mod components;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod nifti;
pub mod ops;
pub mod pipeline;
pub mod preprocess;
pub mod render;
pub mod vessel;
pub mod volume;

pub use components::{count_components, filter_by_size, label_components, Connectivity, LabelMap3D};
pub use error::{Error, Result};
pub use geometry::Geometry;
pub use metrics::{alcd, avd, dice, evaluate, lesionwise_f1, LesionMatching, MetricsReport};
pub use nifti::{read_volume, read_volume_as, write_volume, Datatype, NiftiHeader};
pub use ops::{apply_mask, band_suppress, clip, nonzero_mask, subtract};
pub use preprocess::{
    baseline_normalize, clinical_window, compute_foreground_stats, equalize_foreground,
    fallback_skull_strip, range_kept_percent, ForegroundStats, WindowSpec,
};
pub use render::{render_slice, Plane, RasterImage, RenderSpec, SliceIndex};
pub use vessel::{segment_vessels, vessel_channel, VesselSegParams};
pub use volume::{geometry_compatible, BinaryMask3D, Modality, Volume3D};
