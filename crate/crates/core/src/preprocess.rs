//! Intensity preprocessing: clinical windowing with min-max normalization,
//! foreground histogram equalization, percentile/z-score baseline
//! normalization, and a threshold+morphology fallback brain mask.

use serde::{Deserialize, Serialize};

use crate::components::{label_components, Connectivity};
use crate::error::{Error, Result};
use crate::ops::check_mask_geometry;
use crate::volume::{BinaryMask3D, Modality, Volume3D};

/// Default number of equal-width histogram buckets for equalization.
pub const DEFAULT_EQUALIZE_BINS: usize = 256;

/// Soft-tissue HU band used by the fallback skull strip.
pub const FALLBACK_TISSUE_BAND: (f64, f64) = (0.0, 100.0);

/// Per-modality clinical intensity window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub modality: Modality,
    pub lo: f64,
    pub hi: f64,
}

impl WindowSpec {
    pub fn new(modality: Modality, lo: f64, hi: f64) -> Result<Self> {
        if lo >= hi {
            return Err(Error::InvalidWindow { lo, hi });
        }
        Ok(WindowSpec { modality, lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Clinical windows for the five input channels: CTA in HU, CBF in
/// mL/100g/min, CBV in mL/100g, MTT and Tmax in seconds.
pub const DEFAULT_WINDOWS: [(Modality, f64, f64); 5] = [
    (Modality::Cta, 0.0, 90.0),
    (Modality::Cbf, 0.0, 35.0),
    (Modality::Cbv, 0.0, 10.0),
    (Modality::Mtt, 0.0, 20.0),
    (Modality::Tmax, 0.0, 7.0),
];

/// Foreground intensity ranges (0.5th-99.5th percentiles) observed by the
/// baseline preprocessing on the challenge data, per channel.
pub const BASELINE_FOREGROUND_RANGES: [(Modality, f64, f64); 5] = [
    (Modality::Cta, -3.25, 342.48),
    (Modality::Cbf, 1.42, 72.64),
    (Modality::Cbv, -10.31, 19.35),
    (Modality::Mtt, -96.91, 28.50),
    (Modality::Tmax, -20.76, 20.29),
];

/// Published "% of range kept" column the range check compares against.
pub const PUBLISHED_RANGE_KEPT: [(Modality, f64); 5] = [
    (Modality::Cta, 26.0),
    (Modality::Cbf, 49.2),
    (Modality::Cbv, 33.7),
    (Modality::Mtt, 15.9),
    (Modality::Tmax, 17.1),
];

pub fn default_window(modality: Modality) -> Option<WindowSpec> {
    DEFAULT_WINDOWS
        .iter()
        .find(|(m, _, _)| *m == modality)
        .map(|(m, lo, hi)| WindowSpec {
            modality: *m,
            lo: *lo,
            hi: *hi,
        })
}

/// Pooled foreground intensity statistics (percentiles by nearest rank,
/// mean/std over the same voxels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForegroundStats {
    pub p_low: f64,
    pub p_high: f64,
    pub mean: f64,
    pub std: f64,
    pub n_voxels: usize,
}

/// Window, min-max normalize to [0,1] anchored at the window bounds, and
/// zero everything outside the brain mask. NaN voxels are background.
pub fn clinical_window(
    vol: &Volume3D,
    spec: &WindowSpec,
    brain: &BinaryMask3D,
) -> Result<Volume3D> {
    if spec.modality != vol.modality {
        return Err(Error::ModalityMismatch {
            expected: spec.modality,
            actual: vol.modality,
        });
    }
    if spec.lo >= spec.hi {
        return Err(Error::InvalidWindow {
            lo: spec.lo,
            hi: spec.hi,
        });
    }
    check_mask_geometry(vol, brain)?;
    let width = spec.hi - spec.lo;
    let voxels = vol
        .voxels
        .iter()
        .zip(brain.bits.iter())
        .map(|(&v, &inside)| {
            if inside && v.is_finite() {
                (v.clamp(spec.lo, spec.hi) - spec.lo) / width
            } else {
                0.0
            }
        })
        .collect();
    Ok(vol.with_voxels(voxels))
}

/// Histogram-equalize foreground voxels of a [0,1]-valued volume via the
/// empirical CDF over `bins` equal-width buckets; background is zeroed.
pub fn equalize_foreground(
    vol: &Volume3D,
    brain: &BinaryMask3D,
    bins: usize,
) -> Result<Volume3D> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "equalization needs at least 2 bins, got {bins}"
        )));
    }
    check_mask_geometry(vol, brain)?;

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &vol.voxels {
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if min < -1e-9 || max > 1.0 + 1e-9 {
        return Err(Error::OutOfRangeInput { min, max });
    }

    let bucket = |v: f64| -> usize {
        let v = v.clamp(0.0, 1.0);
        ((v * bins as f64) as usize).min(bins - 1)
    };

    let mut histogram = vec![0usize; bins];
    let mut n_foreground = 0usize;
    for (&v, &inside) in vol.voxels.iter().zip(brain.bits.iter()) {
        if inside && v.is_finite() {
            histogram[bucket(v)] += 1;
            n_foreground += 1;
        }
    }
    if n_foreground == 0 {
        // Nothing to equalize; background-zero semantics still apply.
        return Ok(vol.with_voxels(vec![0.0; vol.voxels.len()]));
    }

    let mut cdf = vec![0.0f64; bins];
    let mut cumulative = 0usize;
    for (i, count) in histogram.iter().enumerate() {
        cumulative += count;
        cdf[i] = cumulative as f64 / n_foreground as f64;
    }

    let voxels = vol
        .voxels
        .iter()
        .zip(brain.bits.iter())
        .map(|(&v, &inside)| {
            if inside && v.is_finite() {
                cdf[bucket(v)]
            } else {
                0.0
            }
        })
        .collect();
    Ok(vol.with_voxels(voxels))
}

/// Pool foreground voxel values across a dataset and compute the 0.5th and
/// 99.5th nearest-rank percentiles plus mean and (population) standard
/// deviation.
pub fn compute_foreground_stats(
    volumes: &[Volume3D],
    foreground: &[BinaryMask3D],
) -> Result<ForegroundStats> {
    if volumes.is_empty() || volumes.len() != foreground.len() {
        return Err(Error::InvalidParameter(format!(
            "need equal, non-empty volume/mask lists (got {} and {})",
            volumes.len(),
            foreground.len()
        )));
    }
    let mut pooled = Vec::new();
    for (vol, mask) in volumes.iter().zip(foreground.iter()) {
        check_mask_geometry(vol, mask)?;
        for (&v, &inside) in vol.voxels.iter().zip(mask.bits.iter()) {
            if inside && v.is_finite() {
                pooled.push(v);
            }
        }
    }
    stats_from_pooled(pooled)
}

/// Stats over an already-pooled multiset of foreground values.
pub fn stats_from_pooled(mut values: Vec<f64>) -> Result<ForegroundStats> {
    if values.is_empty() {
        return Err(Error::EmptyForeground);
    }
    let n = values.len();
    let mean = pairwise_sum(&values) / n as f64;
    let deviations: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std = (pairwise_sum(&deviations) / n as f64).sqrt();
    values.sort_by(f64::total_cmp);
    let p_low = nearest_rank(&values, 0.5);
    let p_high = nearest_rank(&values, 99.5);
    Ok(ForegroundStats {
        p_low,
        p_high,
        mean,
        std,
        n_voxels: n,
    })
}

/// Nearest-rank percentile of a sorted slice: value at rank ceil(p/100 * n).
fn nearest_rank(sorted: &[f64], percentile: f64) -> f64 {
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Deterministic pairwise summation.
fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 64 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Clip to the percentile band, then z-score with the same stats; applied
/// to every voxel. Non-finite voxels map to zero.
pub fn baseline_normalize(vol: &Volume3D, stats: &ForegroundStats) -> Result<Volume3D> {
    if stats.std <= 0.0 {
        return Err(Error::DegenerateStats);
    }
    let voxels = vol
        .voxels
        .iter()
        .map(|&v| {
            if v.is_finite() {
                (v.clamp(stats.p_low, stats.p_high) - stats.mean) / stats.std
            } else {
                0.0
            }
        })
        .collect();
    Ok(vol.with_voxels(voxels))
}

/// Percentage of the reference intensity range retained by the clinical
/// window, rounded to one decimal.
pub fn range_kept_percent(clinical: &WindowSpec, reference_range: (f64, f64)) -> Result<f64> {
    if clinical.lo >= clinical.hi {
        return Err(Error::InvalidWindow {
            lo: clinical.lo,
            hi: clinical.hi,
        });
    }
    let (ref_lo, ref_hi) = reference_range;
    if ref_lo >= ref_hi {
        return Err(Error::InvalidWindow {
            lo: ref_lo,
            hi: ref_hi,
        });
    }
    let percent = 100.0 * clinical.width() / (ref_hi - ref_lo);
    Ok((percent * 10.0).round() / 10.0)
}

/// Test-only stand-in for a learned brain extractor: largest 26-connected
/// component of the soft-tissue band [0, 100] HU after a 3x3x3 erosion and
/// dilation. Not clinically valid; exists so the pipeline can run without
/// an external mask file.
pub fn fallback_skull_strip(ncct: &Volume3D) -> Result<BinaryMask3D> {
    if ncct.modality != Modality::Ncct {
        return Err(Error::ModalityMismatch {
            expected: Modality::Ncct,
            actual: ncct.modality,
        });
    }
    let (lo, hi) = FALLBACK_TISSUE_BAND;
    let bits: Vec<bool> = ncct
        .voxels
        .iter()
        .map(|&v| v.is_finite() && v >= lo && v <= hi)
        .collect();
    if !bits.iter().any(|b| *b) {
        return Err(Error::EmptyForeground);
    }
    let mut band = BinaryMask3D {
        geometry: ncct.geometry(),
        bits,
    };
    erode_box3(&mut band);
    dilate_box3(&mut band);
    let lm = label_components(&band, Connectivity::TwentySix);
    let largest = lm
        .component_sizes
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
        .map(|(i, _)| i + 1);
    match largest {
        None => Err(Error::EmptyForeground),
        Some(label) => {
            let bits = lm.labels.iter().map(|&l| l as usize == label).collect();
            Ok(BinaryMask3D {
                geometry: ncct.geometry(),
                bits,
            })
        }
    }
}

/// Box (3x3x3) erosion; voxels outside the grid count as background.
fn erode_box3(mask: &mut BinaryMask3D) {
    morph_box3(mask, false)
}

/// Box (3x3x3) dilation.
fn dilate_box3(mask: &mut BinaryMask3D) {
    morph_box3(mask, true)
}

fn morph_box3(mask: &mut BinaryMask3D, dilate: bool) {
    let [nx, ny, nz] = mask.geometry.dims;
    let src = mask.bits.clone();
    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let mut acc = !dilate;
                'scan: for dz in -1isize..=1 {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let (px, py, pz) =
                                (x as isize + dx, y as isize + dy, z as isize + dz);
                            let inside = px >= 0
                                && py >= 0
                                && pz >= 0
                                && px < nx as isize
                                && py < ny as isize
                                && pz < nz as isize;
                            let v = inside
                                && src[px as usize + nx * (py as usize + ny * pz as usize)];
                            if dilate {
                                if v {
                                    acc = true;
                                    break 'scan;
                                }
                            } else if !v {
                                acc = false;
                                break 'scan;
                            }
                        }
                    }
                }
                mask.bits[idx] = acc;
                idx += 1;
            }
        }
    }
}
