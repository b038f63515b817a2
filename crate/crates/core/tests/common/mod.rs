//! Shared helpers for integration tests: independent oracles and
//! synthetic dataset builders.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use ctprep::geometry::Geometry;
use ctprep::pipeline::{SubjectManifest, SubjectPaths};
use ctprep::{
    write_volume, BinaryMask3D, Connectivity, Datatype, Modality, Volume3D,
};

/// Independent BFS flood-fill labeling, numbering components by first voxel
/// in scan order — the oracle the union-find labeling must match.
pub fn flood_fill_labels(mask: &BinaryMask3D, connectivity: Connectivity) -> Vec<u32> {
    let [nx, ny, nz] = mask.geometry.dims;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; mask.bits.len()];
    let mut next = 0u32;
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let x = (i % nx) as isize;
            let y = ((i / nx) % ny) as isize;
            let z = (i / (nx * ny)) as isize;
            for [dx, dy, dz] in &offsets {
                let (px, py, pz) = (x + dx, y + dy, z + dz);
                if px < 0
                    || py < 0
                    || pz < 0
                    || px >= nx as isize
                    || py >= ny as isize
                    || pz >= nz as isize
                {
                    continue;
                }
                let j = px as usize + nx * (py as usize + ny * pz as usize);
                if mask.bits[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    labels
}

pub fn random_mask(rng: &mut ChaCha8Rng, dims: [usize; 3], density: f64) -> BinaryMask3D {
    let g = Geometry::from_spacing(dims, [1.0; 3]);
    let bits = (0..g.voxel_count()).map(|_| rng.random_bool(density)).collect();
    BinaryMask3D::from_bits(g, bits).unwrap()
}

pub struct Phantom {
    pub cta: Volume3D,
    pub ncct: Volume3D,
    pub brain: BinaryMask3D,
    pub tube: BinaryMask3D,
    pub speckle: BinaryMask3D,
}

/// NCCT = 40 HU brain ball in -1000 HU air; CTA adds +300 HU along an
/// x-axis tube and +200 HU on isolated sub-threshold speckles.
pub fn tube_phantom(n: usize, tube_radius: usize, speckles: usize) -> Phantom {
    let dims = [n, n, n];
    let g = Geometry::from_spacing(dims, [1.0; 3]);
    let c = n as f64 / 2.0 - 0.5;
    let brain_r = n as f64 * 0.42;

    let mut brain_bits = vec![false; g.voxel_count()];
    let mut ncct = vec![-1000.0; g.voxel_count()];
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
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

    let mut speckle_bits = vec![false; g.voxel_count()];
    let speckle_size = 10.min(n / 4);
    for k in 0..speckles {
        let base_x = x_lo + 3 * k + 2;
        let base_y = (c + tube_radius as f64 + 5.0) as usize + 3 * k;
        let base_z = n / 4;
        for s in 0..speckle_size {
            let i = g.index(base_x + s % 2, base_y + (s / 2) % 2, base_z + s / 4);
            if brain_bits[i] && !tube_bits[i] {
                cta[i] = ncct[i] + 200.0;
                speckle_bits[i] = true;
            }
        }
    }

    Phantom {
        cta: Volume3D::new(dims, [1.0; 3], cta, Modality::Cta).unwrap(),
        ncct: Volume3D::new(dims, [1.0; 3], ncct, Modality::Ncct).unwrap(),
        brain: BinaryMask3D::from_bits(g, brain_bits).unwrap(),
        tube: BinaryMask3D::from_bits(g, tube_bits).unwrap(),
        speckle: BinaryMask3D::from_bits(g, speckle_bits).unwrap(),
    }
}

/// Write a full synthetic subject (six scans + brain mask + ground-truth
/// lesion) as NIfTI files and return its manifest entry.
pub fn write_subject(
    data_dir: &Path,
    out_dir: &Path,
    subject_id: &str,
    seed: u64,
    with_mask_file: bool,
    with_gt: bool,
) -> SubjectManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fs::create_dir_all(data_dir).unwrap();
    let n = 20usize;
    let phantom = tube_phantom(n, 2, 1);
    let g = phantom.brain.geometry;

    let perfusion = |rng: &mut ChaCha8Rng, lo: f64, hi: f64, nan_at: Option<usize>| {
        let mut values: Vec<f64> = (0..g.voxel_count())
            .map(|_| rng.random_range(lo..hi))
            .collect();
        if let Some(i) = nan_at {
            values[i] = f64::NAN;
        }
        values
    };

    let save = |vol: &Volume3D, name: &str, datatype: Datatype| {
        let path = data_dir.join(name);
        write_volume(vol, &path, datatype).unwrap();
        path
    };

    let dims = g.dims;
    let nan_voxel = g.index(n / 2, n / 2, n / 2 + 2);
    let cbf = Volume3D::new(dims, [1.0; 3], perfusion(&mut rng, 0.0, 80.0, None), Modality::Cbf)
        .unwrap();
    let cbv = Volume3D::new(dims, [1.0; 3], perfusion(&mut rng, 0.0, 15.0, None), Modality::Cbv)
        .unwrap();
    let mtt = Volume3D::new(dims, [1.0; 3], perfusion(&mut rng, 0.0, 30.0, None), Modality::Mtt)
        .unwrap();
    let tmax = Volume3D::new(
        dims,
        [1.0; 3],
        perfusion(&mut rng, 0.0, 12.0, Some(nan_voxel)),
        Modality::Tmax,
    )
    .unwrap();

    let mut paths = SubjectPaths {
        ncct: Some(save(&phantom.ncct, &format!("{subject_id}_ncct.nii.gz"), Datatype::Float32)),
        cta: Some(save(&phantom.cta, &format!("{subject_id}_cta.nii.gz"), Datatype::Float32)),
        cbf: Some(save(&cbf, &format!("{subject_id}_cbf.nii.gz"), Datatype::Float32)),
        cbv: Some(save(&cbv, &format!("{subject_id}_cbv.nii.gz"), Datatype::Float32)),
        mtt: Some(save(&mtt, &format!("{subject_id}_mtt.nii.gz"), Datatype::Float32)),
        tmax: Some(save(&tmax, &format!("{subject_id}_tmax.nii.gz"), Datatype::Float32)),
        brain_mask: None,
        gt_lesion: None,
    };
    if with_mask_file {
        let mask_vol = mask_to_volume(&phantom.brain);
        paths.brain_mask = Some(save(
            &mask_vol,
            &format!("{subject_id}_mask.nii.gz"),
            Datatype::Uint8,
        ));
    }
    if with_gt {
        // Two small lesion blobs inside the brain.
        let mut bits = vec![false; g.voxel_count()];
        for dz in 0..2 {
            for dy in 0..3 {
                for dx in 0..3 {
                    bits[g.index(6 + dx, 6 + dy, 10 + dz)] = true;
                    bits[g.index(12 + dx, 12 + dy, 8 + dz)] = true;
                }
            }
        }
        let gt = BinaryMask3D::from_bits(g, bits).unwrap();
        let gt_vol = mask_to_volume(&gt);
        paths.gt_lesion = Some(save(
            &gt_vol,
            &format!("{subject_id}_lesion.nii.gz"),
            Datatype::Uint8,
        ));
    }

    SubjectManifest {
        subject_id: subject_id.to_string(),
        paths,
        outputs_dir: out_dir.join(subject_id),
    }
}

pub fn mask_to_volume(mask: &BinaryMask3D) -> Volume3D {
    let values = mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Volume3D::new(mask.geometry.dims, mask.geometry.spacing, values, Modality::Mask).unwrap()
}

/// SHA-256 of every file under `dir`, keyed by path relative to `dir`.
pub fn sha256_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).unwrap();
                let digest = Sha256::digest(&bytes);
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                out.insert(rel, hex);
            }
        }
    }
    out
}
