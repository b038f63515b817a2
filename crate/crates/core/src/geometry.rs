//! Voxel-grid geometry: dimensions, spacing, and the voxel-to-world affine.

/// Relative tolerance used when comparing spacing and affine entries.
pub const GEOMETRY_REL_TOL: f64 = 1e-4;

/// Dimensions, voxel spacing (mm), and 4x4 voxel-to-world transform of a
/// 3-D grid. Voxels are stored in canonical order with x fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub affine: [[f64; 4]; 4],
}

impl Geometry {
    /// Axis-aligned geometry with the affine built from the spacing alone.
    pub fn from_spacing(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        let mut affine = [[0.0; 4]; 4];
        for (i, s) in spacing.iter().enumerate() {
            affine[i][i] = *s;
        }
        affine[3][3] = 1.0;
        Geometry {
            dims,
            spacing,
            affine,
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Volume of one voxel in cubic millimetres.
    pub fn voxel_volume_mm3(&self) -> f64 {
        (self.spacing[0] * self.spacing[1] * self.spacing[2]).abs()
    }

    /// Linear index of voxel (x, y, z), x fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// True iff dims are equal and every spacing/affine entry agrees within
    /// `GEOMETRY_REL_TOL` relative tolerance.
    pub fn compatible(&self, other: &Geometry) -> bool {
        if self.dims != other.dims {
            return false;
        }
        let spacing_ok = self
            .spacing
            .iter()
            .zip(other.spacing.iter())
            .all(|(a, b)| rel_eq(*a, *b));
        let affine_ok = self
            .affine
            .iter()
            .flatten()
            .zip(other.affine.iter().flatten())
            .all(|(a, b)| rel_eq(*a, *b));
        spacing_ok && affine_ok
    }

    /// Human-readable mismatch description, for error messages.
    pub(crate) fn mismatch_message(&self, other: &Geometry) -> String {
        if self.dims != other.dims {
            format!("dims {:?} vs {:?}", self.dims, other.dims)
        } else {
            "spacing or affine differ beyond 1e-4 relative tolerance".to_string()
        }
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= GEOMETRY_REL_TOL * a.abs().max(b.abs())
}
