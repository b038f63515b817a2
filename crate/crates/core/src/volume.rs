//! Core in-memory types: scalar volumes and binary masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::nifti::NiftiHeader;

/// Acquisition or derived-map type of a volume.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ncct,
    Cta,
    Cbf,
    Cbv,
    Mtt,
    Tmax,
    Mask,
    Other,
}

impl Modality {
    /// The five model input channels, in the order they are reported.
    pub const CHANNELS: [Modality; 5] = [
        Modality::Cta,
        Modality::Cbf,
        Modality::Cbv,
        Modality::Mtt,
        Modality::Tmax,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Ncct => "ncct",
            Modality::Cta => "cta",
            Modality::Cbf => "cbf",
            Modality::Cbv => "cbv",
            Modality::Mtt => "mtt",
            Modality::Tmax => "tmax",
            Modality::Mask => "mask",
            Modality::Other => "other",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ncct" => Ok(Modality::Ncct),
            "cta" => Ok(Modality::Cta),
            "cbf" => Ok(Modality::Cbf),
            "cbv" => Ok(Modality::Cbv),
            "mtt" => Ok(Modality::Mtt),
            "tmax" => Ok(Modality::Tmax),
            "mask" => Ok(Modality::Mask),
            "other" => Ok(Modality::Other),
            other => Err(Error::InvalidParameter(format!(
                "unknown modality '{other}'"
            ))),
        }
    }
}

/// A dense 3-D scalar grid. Voxels are 64-bit reals in canonical order
/// (x fastest), already rescaled by the header's slope/intercept.
#[derive(Debug, Clone)]
pub struct Volume3D {
    pub header: NiftiHeader,
    pub voxels: Vec<f64>,
    pub modality: Modality,
}

impl Volume3D {
    /// Build a volume with a synthesized axis-aligned header.
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        voxels: Vec<f64>,
        modality: Modality,
    ) -> Result<Self> {
        Self::from_parts(NiftiHeader::synthetic(dims, spacing), voxels, modality)
    }

    /// Build a volume from an existing header; validates the voxel count.
    pub fn from_parts(header: NiftiHeader, voxels: Vec<f64>, modality: Modality) -> Result<Self> {
        let expected = header.dims[0] * header.dims[1] * header.dims[2];
        if voxels.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                actual: voxels.len(),
            });
        }
        Ok(Volume3D {
            header,
            voxels,
            modality,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.header.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.header.pixdim
    }

    pub fn geometry(&self) -> Geometry {
        self.header.geometry()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.header.dims[0] * (y + self.header.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.voxels[self.index(x, y, z)]
    }

    /// Same header and modality, new voxel payload.
    pub(crate) fn with_voxels(&self, voxels: Vec<f64>) -> Volume3D {
        debug_assert_eq!(voxels.len(), self.voxels.len());
        Volume3D {
            header: self.header.clone(),
            voxels,
            modality: self.modality,
        }
    }

    /// Min and max over finite voxels; `None` when no voxel is finite.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for &v in &self.voxels {
            if v.is_finite() {
                range = Some(match range {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
        range
    }
}

/// A boolean grid sharing a volume's geometry (brain masks, vessel masks,
/// lesion masks).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask3D {
    pub geometry: Geometry,
    pub bits: Vec<bool>,
}

impl BinaryMask3D {
    pub fn from_bits(geometry: Geometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geometry.voxel_count() {
            return Err(Error::DimMismatch {
                expected: geometry.voxel_count(),
                actual: bits.len(),
            });
        }
        Ok(BinaryMask3D { geometry, bits })
    }

    pub fn filled(geometry: Geometry, value: bool) -> Self {
        let n = geometry.voxel_count();
        BinaryMask3D {
            geometry,
            bits: vec![value; n],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.geometry.index(x, y, z)]
    }

    /// True iff every set voxel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask3D) -> bool {
        self.bits
            .iter()
            .zip(other.bits.iter())
            .all(|(a, b)| !*a || *b)
    }
}

/// True iff the two volumes live on the same grid (dims equal, spacing and
/// affine within 1e-4 relative tolerance).
pub fn geometry_compatible(a: &Volume3D, b: &Volume3D) -> bool {
    a.geometry().compatible(&b.geometry())
}
