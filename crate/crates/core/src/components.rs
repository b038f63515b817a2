//! 3-D connected-component labeling and size filtering.
//!
//! Two-pass union-find over a raster scan: the first pass assigns
//! provisional labels and records equivalences against already-visited
//! neighbors, the second pass resolves roots and renumbers components
//! densely in order of their first voxel in scan order (x fastest). The
//! labeling is therefore deterministic regardless of thread count.

use serde::{Deserialize, Serialize};

use crate::geometry::Geometry;
use crate::volume::BinaryMask3D;

/// Voxel adjacency: face (6), face+edge (18), or face+edge+corner (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Six,
    Eighteen,
    TwentySix,
}

impl Connectivity {
    /// All neighbor offsets (dx, dy, dz) for this adjacency.
    pub fn offsets(&self) -> Vec<[isize; 3]> {
        let max_abs_sum = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    if dx.abs() + dy.abs() + dz.abs() <= max_abs_sum {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets pointing at voxels already visited in scan order.
    fn previous_offsets(&self) -> Vec<[isize; 3]> {
        self.offsets()
            .into_iter()
            .filter(|[dx, dy, dz]| {
                *dz < 0 || (*dz == 0 && *dy < 0) || (*dz == 0 && *dy == 0 && *dx < 0)
            })
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(format!("connectivity must be 6, 18, or 26, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }
}

/// Dense component labeling of a binary mask. Label 0 is background;
/// components are numbered 1..=K by first voxel in scan order.
#[derive(Debug, Clone)]
pub struct LabelMap3D {
    pub geometry: Geometry,
    pub labels: Vec<u32>,
    /// Voxel count per component; index `label - 1`.
    pub component_sizes: Vec<usize>,
    pub connectivity: Connectivity,
}

impl LabelMap3D {
    pub fn component_count(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn size_of(&self, label: u32) -> Option<usize> {
        if label == 0 {
            None
        } else {
            self.component_sizes.get(label as usize - 1).copied()
        }
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        UnionFind { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Attach the larger root under the smaller so roots stay stable
            // in scan order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Label the maximal connected components of the mask's set voxels.
pub fn label_components(mask: &BinaryMask3D, connectivity: Connectivity) -> LabelMap3D {
    let [nx, ny, nz] = mask.geometry.dims;
    let n = mask.bits.len();
    let mut provisional = vec![0u32; n]; // provisional label + 1; 0 = background
    let mut uf = UnionFind::new();
    let prev = connectivity.previous_offsets();

    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.bits[idx] {
                    let mut joined: Option<u32> = None;
                    for [dx, dy, dz] in &prev {
                        let (px, py, pz) = (
                            x as isize + dx,
                            y as isize + dy,
                            z as isize + dz,
                        );
                        if px < 0
                            || py < 0
                            || pz < 0
                            || px >= nx as isize
                            || py >= ny as isize
                            || pz >= nz as isize
                        {
                            continue;
                        }
                        let pidx =
                            px as usize + nx * (py as usize + ny * pz as usize);
                        let p = provisional[pidx];
                        if p != 0 {
                            match joined {
                                None => joined = Some(p - 1),
                                Some(existing) => uf.union(existing, p - 1),
                            }
                        }
                    }
                    let label = match joined {
                        Some(l) => l,
                        None => uf.make(),
                    };
                    provisional[idx] = label + 1;
                }
                idx += 1;
            }
        }
    }

    // Second pass: resolve roots and renumber densely by first appearance.
    let mut root_to_dense: Vec<u32> = vec![0; uf.parent.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut labels = vec![0u32; n];
    for i in 0..n {
        let p = provisional[i];
        if p == 0 {
            continue;
        }
        let root = uf.find(p - 1) as usize;
        let dense = if root_to_dense[root] == 0 {
            sizes.push(0);
            let next = sizes.len() as u32;
            root_to_dense[root] = next;
            next
        } else {
            root_to_dense[root]
        };
        labels[i] = dense;
        sizes[dense as usize - 1] += 1;
    }

    LabelMap3D {
        geometry: mask.geometry,
        labels,
        component_sizes: sizes,
        connectivity,
    }
}

/// Union of all components whose voxel count is at least `s_min`.
pub fn filter_by_size(lm: &LabelMap3D, s_min: usize) -> BinaryMask3D {
    let keep: Vec<bool> = lm.component_sizes.iter().map(|s| *s >= s_min).collect();
    let bits = lm
        .labels
        .iter()
        .map(|&l| l != 0 && keep[l as usize - 1])
        .collect();
    BinaryMask3D {
        geometry: lm.geometry,
        bits,
    }
}

/// Number of connected components of the mask under the given adjacency.
pub fn count_components(mask: &BinaryMask3D, connectivity: Connectivity) -> usize {
    label_components(mask, connectivity).component_count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::VecDeque;

    fn mask_from(dims: [usize; 3], bits: Vec<bool>) -> BinaryMask3D {
        BinaryMask3D::from_bits(Geometry::from_spacing(dims, [1.0; 3]), bits).unwrap()
    }

    /// Independent BFS flood-fill labeling in scan order.
    fn flood_fill_labels(mask: &BinaryMask3D, connectivity: Connectivity) -> Vec<u32> {
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

    #[test]
    fn empty_mask_has_no_components() {
        let m = mask_from([3, 3, 3], vec![false; 27]);
        let lm = label_components(&m, Connectivity::TwentySix);
        assert_eq!(lm.component_count(), 0);
        assert!(lm.labels.iter().all(|l| *l == 0));
    }

    #[test]
    fn corner_touching_voxels_depend_on_connectivity() {
        // Voxels (0,0,0) and (1,1,1) share only a corner.
        let mut bits = vec![false; 8];
        bits[0] = true;
        bits[7] = true;
        let m = mask_from([2, 2, 2], bits);
        assert_eq!(count_components(&m, Connectivity::TwentySix), 1);
        assert_eq!(count_components(&m, Connectivity::Six), 2);
        // Edge-touching voxels: (0,0,0) and (1,1,0).
        let mut bits = vec![false; 8];
        bits[0] = true;
        bits[3] = true;
        let m = mask_from([2, 2, 2], bits);
        assert_eq!(count_components(&m, Connectivity::Eighteen), 1);
        assert_eq!(count_components(&m, Connectivity::Six), 2);
    }

    #[test]
    fn matches_flood_fill_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(72024);
        for conn in [
            Connectivity::Six,
            Connectivity::Eighteen,
            Connectivity::TwentySix,
        ] {
            for _ in 0..100 {
                let dims = [
                    rng.random_range(1..=12),
                    rng.random_range(1..=12),
                    rng.random_range(1..=12),
                ];
                let n = dims[0] * dims[1] * dims[2];
                let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
                let m = mask_from(dims, bits);
                let lm = label_components(&m, conn);
                // Both labelings number components by first voxel in scan
                // order, so the arrays must agree exactly.
                assert_eq!(lm.labels, flood_fill_labels(&m, conn));
            }
        }
    }

    #[test]
    fn partition_property_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dims = [10, 9, 8];
        let n = dims[0] * dims[1] * dims[2];
        let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let m = mask_from(dims, bits.clone());
        let lm = label_components(&m, Connectivity::TwentySix);
        for i in 0..n {
            assert_eq!(bits[i], lm.labels[i] != 0);
        }
        let total: usize = lm.component_sizes.iter().sum();
        assert_eq!(total, m.count_true());
        assert!(lm.component_sizes.iter().all(|s| *s > 0));
    }

    #[test]
    fn size_filter_keeps_at_least_s_min() {
        // Three bars of sizes 30, 25, 24 along x, separated in y.
        let dims = [30, 5, 1];
        let g = Geometry::from_spacing(dims, [1.0; 3]);
        let mut bits = vec![false; g.voxel_count()];
        for x in 0..30 {
            bits[g.index(x, 0, 0)] = true;
        }
        for x in 0..25 {
            bits[g.index(x, 2, 0)] = true;
        }
        for x in 0..24 {
            bits[g.index(x, 4, 0)] = true;
        }
        let m = BinaryMask3D::from_bits(g, bits).unwrap();
        let lm = label_components(&m, Connectivity::TwentySix);
        assert_eq!(lm.component_sizes, vec![30, 25, 24]);
        let kept = filter_by_size(&lm, 25);
        assert_eq!(kept.count_true(), 55);
        assert!(kept.at(0, 0, 0) && kept.at(0, 2, 0) && !kept.at(0, 4, 0));
        // s_min = 1 is the identity.
        assert_eq!(filter_by_size(&lm, 1).bits, m.bits);
        // Everything below threshold leaves an empty mask.
        assert_eq!(filter_by_size(&lm, 31).count_true(), 0);
    }

    #[test]
    fn size_filter_is_monotone_in_s_min() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dims = [12, 12, 12];
        let n = dims[0] * dims[1] * dims[2];
        let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        let lm = label_components(&mask_from(dims, bits), Connectivity::Six);
        let mut prev = filter_by_size(&lm, 1);
        for s_min in 2..10 {
            let cur = filter_by_size(&lm, s_min);
            assert!(cur.is_subset_of(&prev));
            prev = cur;
        }
    }

    #[test]
    fn count_components_examples() {
        assert_eq!(
            count_components(&mask_from([4, 4, 4], vec![false; 64]), Connectivity::TwentySix),
            0
        );
        assert_eq!(
            count_components(&mask_from([4, 4, 4], vec![true; 64]), Connectivity::TwentySix),
            1
        );
        let g = Geometry::from_spacing([7, 3, 3], [1.0; 3]);
        let mut bits = vec![false; g.voxel_count()];
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..2 {
                    bits[g.index(x, y, z)] = true;
                    bits[g.index(x + 5, y, z)] = true;
                }
            }
        }
        let m = BinaryMask3D::from_bits(g, bits).unwrap();
        assert_eq!(count_components(&m, Connectivity::TwentySix), 2);
    }
}
