//! Vessel segmentation from co-registered CTA and NCCT by digital
//! subtraction: clip both scans to an HU window, apply the brain mask,
//! difference, suppress out-of-band contrast, and keep connected
//! components of at least `s_min` voxels.

use serde::{Deserialize, Serialize};

use crate::components::{count_components, filter_by_size, label_components, Connectivity};
use crate::error::{Error, Result};
use crate::ops::{apply_mask, band_suppress, check_mask_geometry, clip, nonzero_mask, subtract};
use crate::volume::{BinaryMask3D, Modality, Volume3D};

/// Parameters of the subtraction pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VesselSegParams {
    pub hu_window: (f64, f64),
    pub tau_low: f64,
    pub tau_high: f64,
    pub s_min: usize,
    pub connectivity: Connectivity,
}

impl Default for VesselSegParams {
    fn default() -> Self {
        VesselSegParams {
            hu_window: (0.0, 400.0),
            tau_low: 50.0,
            tau_high: 400.0,
            s_min: 25,
            connectivity: Connectivity::TwentySix,
        }
    }
}

impl VesselSegParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hu_window;
        if lo >= hi {
            return Err(Error::InvalidWindow { lo, hi });
        }
        if !(0.0 <= self.tau_low && self.tau_low < self.tau_high && self.tau_high <= hi) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= tau_low < tau_high <= hu_window.hi, got tau_low={}, tau_high={}, hi={hi}",
                self.tau_low, self.tau_high
            )));
        }
        if self.s_min < 1 {
            return Err(Error::InvalidParameter("s_min must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Binary vessel mask from CTA, NCCT, and a brain mask. The inputs are
/// assumed co-registered; geometry incompatibility is a hard error.
pub fn segment_vessels(
    cta: &Volume3D,
    ncct: &Volume3D,
    brain: &BinaryMask3D,
    params: &VesselSegParams,
) -> Result<BinaryMask3D> {
    params.validate()?;
    if cta.modality != Modality::Cta {
        return Err(Error::ModalityMismatch {
            expected: Modality::Cta,
            actual: cta.modality,
        });
    }
    if ncct.modality != Modality::Ncct {
        return Err(Error::ModalityMismatch {
            expected: Modality::Ncct,
            actual: ncct.modality,
        });
    }
    if !cta.geometry().compatible(&ncct.geometry()) {
        return Err(Error::GeometryMismatch(
            cta.geometry().mismatch_message(&ncct.geometry()),
        ));
    }
    check_mask_geometry(cta, brain)?;

    let (lo, hi) = params.hu_window;
    let cta_clipped = clip(cta, lo, hi)?;
    let ncct_clipped = clip(ncct, lo, hi)?;
    let cta_masked = apply_mask(&cta_clipped, brain)?;
    let ncct_masked = apply_mask(&ncct_clipped, brain)?;
    let difference = subtract(&cta_masked, &ncct_masked)?;
    let suppressed = band_suppress(&difference, params.tau_low, params.tau_high)?;
    let candidates = nonzero_mask(&suppressed);
    let labeled = label_components(&candidates, params.connectivity);
    Ok(filter_by_size(&labeled, params.s_min))
}

/// Lift a vessel mask to a 0/1-valued volume usable as a model input
/// channel (and writable through the NIfTI writer).
pub fn vessel_channel(vessels: &BinaryMask3D) -> Volume3D {
    let g = vessels.geometry;
    let voxels = vessels
        .bits
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    Volume3D::new(g.dims, g.spacing, voxels, Modality::Mask)
        .expect("mask geometry is consistent by construction")
}

/// Number of components the candidate mask would produce before size
/// filtering; used for sensitivity reporting.
pub fn candidate_component_count(
    cta: &Volume3D,
    ncct: &Volume3D,
    brain: &BinaryMask3D,
    params: &VesselSegParams,
    connectivity: Connectivity,
) -> Result<usize> {
    let mut p = *params;
    p.connectivity = connectivity;
    p.s_min = 1;
    let mask = segment_vessels(cta, ncct, brain, &p)?;
    Ok(count_components(&mask, connectivity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::nifti::{read_volume, write_volume, Datatype};
    use crate::ops;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) struct Phantom {
        pub cta: Volume3D,
        pub ncct: Volume3D,
        pub brain: BinaryMask3D,
        pub tube: BinaryMask3D,
    }

    /// NCCT = 40 HU brain blob in air; CTA = NCCT + 300 HU along an axial
    /// tube; optional sub-threshold speckles of +200 HU.
    pub(crate) fn tube_phantom(n: usize, tube_radius: usize, speckles: usize) -> Phantom {
        let dims = [n, n, n];
        let g = Geometry::from_spacing(dims, [1.0; 3]);
        let c = n as f64 / 2.0 - 0.5;
        let brain_r = n as f64 * 0.42;

        let mut brain_bits = vec![false; g.voxel_count()];
        let mut ncct = vec![-1000.0; g.voxel_count()];
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let d2 = (x as f64 - c).powi(2)
                        + (y as f64 - c).powi(2)
                        + (z as f64 - c).powi(2);
                    if d2 <= brain_r * brain_r {
                        brain_bits[g.index(x, y, z)] = true;
                        ncct[g.index(x, y, z)] = 40.0;
                    }
                }
            }
        }

        let mut cta = ncct.clone();
        let mut tube_bits = vec![false; g.voxel_count()];
        let r2 = (tube_radius * tube_radius) as f64;
        let x_lo = (n as f64 * 0.2) as usize;
        let x_hi = (n as f64 * 0.8) as usize;
        for x in x_lo..x_hi {
            for y in 0..n {
                for z in 0..n {
                    let d2 = (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
                    let i = g.index(x, y, z);
                    if d2 <= r2 && brain_bits[i] {
                        tube_bits[i] = true;
                        cta[i] += 300.0;
                    }
                }
            }
        }

        // Isolated speckles, N voxels each, placed off the tube axis.
        let speckle_size = 10.min(n / 4);
        for k in 0..speckles {
            let base_x = x_lo + 3 * k + 2;
            let base_y = (c + tube_radius as f64 + 5.0) as usize + 3 * k;
            let base_z = n / 4;
            for s in 0..speckle_size {
                let i = g.index(base_x + s % 2, base_y + (s / 2) % 2, base_z + s / 4);
                if brain_bits[i] && !tube_bits[i] {
                    cta[i] = ncct[i] + 200.0;
                }
            }
        }

        Phantom {
            cta: Volume3D::new(dims, [1.0; 3], cta, Modality::Cta).unwrap(),
            ncct: Volume3D::new(dims, [1.0; 3], ncct, Modality::Ncct).unwrap(),
            brain: BinaryMask3D::from_bits(g, brain_bits).unwrap(),
            tube: BinaryMask3D::from_bits(g, tube_bits).unwrap(),
        }
    }

    #[test]
    fn recovers_exactly_the_tube() {
        let p = tube_phantom(32, 2, 0);
        assert!(p.tube.count_true() >= 25);
        let out = segment_vessels(&p.cta, &p.ncct, &p.brain, &VesselSegParams::default()).unwrap();
        assert_eq!(out.bits, p.tube.bits);
    }

    #[test]
    fn speckles_below_s_min_are_dropped() {
        let p = tube_phantom(32, 2, 3);
        let out = segment_vessels(&p.cta, &p.ncct, &p.brain, &VesselSegParams::default()).unwrap();
        assert_eq!(out.bits, p.tube.bits);
        // Without the size filter the speckles do appear.
        let mut loose = VesselSegParams::default();
        loose.s_min = 1;
        let all = segment_vessels(&p.cta, &p.ncct, &p.brain, &loose).unwrap();
        assert!(all.count_true() > p.tube.count_true());
    }

    #[test]
    fn identical_inputs_give_empty_mask() {
        let p = tube_phantom(24, 2, 0);
        let mut cta_copy = p.ncct.clone();
        cta_copy.modality = Modality::Cta;
        let out =
            segment_vessels(&cta_copy, &p.ncct, &p.brain, &VesselSegParams::default()).unwrap();
        assert_eq!(out.count_true(), 0);
    }

    #[test]
    fn output_stays_inside_brain_mask() {
        let p = tube_phantom(28, 3, 2);
        let out = segment_vessels(&p.cta, &p.ncct, &p.brain, &VesselSegParams::default()).unwrap();
        assert!(out.is_subset_of(&p.brain));
    }

    #[test]
    fn modality_and_geometry_are_checked() {
        let p = tube_phantom(16, 2, 0);
        assert!(matches!(
            segment_vessels(&p.ncct, &p.ncct, &p.brain, &VesselSegParams::default()),
            Err(Error::ModalityMismatch { .. })
        ));
        let small = tube_phantom(8, 1, 0);
        assert!(matches!(
            segment_vessels(&p.cta, &small.ncct, &p.brain, &VesselSegParams::default()),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn param_invariants_are_enforced() {
        let mut p = VesselSegParams::default();
        p.tau_low = -1.0;
        assert!(p.validate().is_err());
        let mut p = VesselSegParams::default();
        p.tau_high = 500.0; // above hu_window.hi
        assert!(p.validate().is_err());
        let mut p = VesselSegParams::default();
        p.s_min = 0;
        assert!(p.validate().is_err());
        assert!(VesselSegParams::default().validate().is_ok());
    }

    #[test]
    fn matches_hand_composed_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..5 {
            let dims = [14, 13, 12];
            let g = Geometry::from_spacing(dims, [1.0; 3]);
            let n = g.voxel_count();
            let ncct_vals: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..500.0)).collect();
            let cta_vals: Vec<f64> = ncct_vals
                .iter()
                .map(|v| v + rng.random_range(-50.0..450.0))
                .collect();
            let brain_bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();

            let ncct = Volume3D::new(dims, [1.0; 3], ncct_vals, Modality::Ncct).unwrap();
            let cta = Volume3D::new(dims, [1.0; 3], cta_vals, Modality::Cta).unwrap();
            let brain = BinaryMask3D::from_bits(g, brain_bits).unwrap();
            let params = VesselSegParams::default();

            let direct = segment_vessels(&cta, &ncct, &brain, &params).unwrap();

            let a = ops::apply_mask(&ops::clip(&cta, 0.0, 400.0).unwrap(), &brain).unwrap();
            let b = ops::apply_mask(&ops::clip(&ncct, 0.0, 400.0).unwrap(), &brain).unwrap();
            let d = ops::band_suppress(&ops::subtract(&a, &b).unwrap(), 50.0, 400.0).unwrap();
            let lm = label_components(&ops::nonzero_mask(&d), params.connectivity);
            let composed = filter_by_size(&lm, params.s_min);
            assert_eq!(direct.bits, composed.bits);
        }
    }

    #[test]
    fn monotone_in_s_min_and_antitone_in_tau_low() {
        let p = tube_phantom(24, 3, 3);
        let mut last = usize::MAX;
        for s_min in [1usize, 10, 25, 200, 100_000] {
            let mut params = VesselSegParams::default();
            params.s_min = s_min;
            let out = segment_vessels(&p.cta, &p.ncct, &p.brain, &params).unwrap();
            assert!(out.count_true() <= last);
            last = out.count_true();
        }
        let mut prev: Option<BinaryMask3D> = None;
        for tau_low in [10.0, 50.0, 150.0, 250.0, 350.0] {
            let mut params = VesselSegParams::default();
            params.tau_low = tau_low;
            params.s_min = 1;
            let out = segment_vessels(&p.cta, &p.ncct, &p.brain, &params).unwrap();
            if let Some(prev) = &prev {
                assert!(out.is_subset_of(prev));
            }
            prev = Some(out);
        }
    }

    #[test]
    fn invariant_to_shared_offset_when_clipping_inactive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dims = [12, 12, 12];
        let g = Geometry::from_spacing(dims, [1.0; 3]);
        let n = g.voxel_count();
        let ncct_vals: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..120.0)).collect();
        let cta_vals: Vec<f64> = ncct_vals
            .iter()
            .map(|v| v + rng.random_range(0.0..200.0))
            .collect();
        let brain = BinaryMask3D::filled(g, true);
        let params = VesselSegParams::default();

        let base = segment_vessels(
            &Volume3D::new(dims, [1.0; 3], cta_vals.clone(), Modality::Cta).unwrap(),
            &Volume3D::new(dims, [1.0; 3], ncct_vals.clone(), Modality::Ncct).unwrap(),
            &brain,
            &params,
        )
        .unwrap();
        let offset = 40.0;
        let shifted = segment_vessels(
            &Volume3D::new(
                dims,
                [1.0; 3],
                cta_vals.iter().map(|v| v + offset).collect(),
                Modality::Cta,
            )
            .unwrap(),
            &Volume3D::new(
                dims,
                [1.0; 3],
                ncct_vals.iter().map(|v| v + offset).collect(),
                Modality::Ncct,
            )
            .unwrap(),
            &brain,
            &params,
        )
        .unwrap();
        assert_eq!(base.bits, shifted.bits);
    }

    #[test]
    fn vessel_channel_examples_and_roundtrip() {
        let g = Geometry::from_spacing([8, 8, 8], [1.0; 3]);
        let empty = BinaryMask3D::filled(g, false);
        assert!(vessel_channel(&empty).voxels.iter().all(|v| *v == 0.0));

        let p = tube_phantom(20, 2, 0);
        let channel = vessel_channel(&p.tube);
        let sum: f64 = channel.voxels.iter().sum();
        assert_eq!(sum as usize, p.tube.count_true());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vessels.nii.gz");
        write_volume(&channel, &path, Datatype::Uint8).unwrap();
        let back = read_volume(&path).unwrap();
        let mask_back = ops::nonzero_mask(&back);
        assert_eq!(mask_back.bits, p.tube.bits);
    }
}
