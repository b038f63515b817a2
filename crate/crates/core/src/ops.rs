//! Geometry-aware element-wise arithmetic and mask algebra.
//!
//! All operations are pure functions over immutable inputs and work in
//! 64-bit reals. NaN voxels (seen in vendor perfusion maps) pass through
//! arithmetic untouched and are excluded when masks are formed.

use crate::error::{Error, Result};
use crate::volume::{BinaryMask3D, Volume3D};

/// Clamp every voxel to `[lo, hi]`. NaN voxels pass through as NaN.
pub fn clip(vol: &Volume3D, lo: f64, hi: f64) -> Result<Volume3D> {
    if lo >= hi {
        return Err(Error::InvalidWindow { lo, hi });
    }
    let voxels = vol
        .voxels
        .iter()
        .map(|&v| if v.is_nan() { v } else { v.clamp(lo, hi) })
        .collect();
    Ok(vol.with_voxels(voxels))
}

/// Keep voxels where the mask is set, zero elsewhere.
pub fn apply_mask(vol: &Volume3D, mask: &BinaryMask3D) -> Result<Volume3D> {
    check_mask_geometry(vol, mask)?;
    let voxels = vol
        .voxels
        .iter()
        .zip(mask.bits.iter())
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    Ok(vol.with_voxels(voxels))
}

/// Voxel-wise difference `a - b`.
pub fn subtract(a: &Volume3D, b: &Volume3D) -> Result<Volume3D> {
    if !a.geometry().compatible(&b.geometry()) {
        return Err(Error::GeometryMismatch(
            a.geometry().mismatch_message(&b.geometry()),
        ));
    }
    let voxels = a
        .voxels
        .iter()
        .zip(b.voxels.iter())
        .map(|(&x, &y)| x - y)
        .collect();
    Ok(a.with_voxels(voxels))
}

/// Zero voxels strictly below `tau_low` or strictly above `tau_high`;
/// values equal to either threshold survive.
pub fn band_suppress(vol: &Volume3D, tau_low: f64, tau_high: f64) -> Result<Volume3D> {
    if tau_low >= tau_high {
        return Err(Error::InvalidWindow {
            lo: tau_low,
            hi: tau_high,
        });
    }
    let voxels = vol
        .voxels
        .iter()
        .map(|&v| if v < tau_low || v > tau_high { 0.0 } else { v })
        .collect();
    Ok(vol.with_voxels(voxels))
}

/// Mask of voxels that are nonzero and finite.
pub fn nonzero_mask(vol: &Volume3D) -> BinaryMask3D {
    let bits = vol
        .voxels
        .iter()
        .map(|&v| v != 0.0 && v.is_finite())
        .collect();
    BinaryMask3D {
        geometry: vol.geometry(),
        bits,
    }
}

pub(crate) fn check_mask_geometry(vol: &Volume3D, mask: &BinaryMask3D) -> Result<()> {
    if vol.geometry().compatible(&mask.geometry) {
        Ok(())
    } else {
        Err(Error::GeometryMismatch(
            vol.geometry().mismatch_message(&mask.geometry),
        ))
    }
}
