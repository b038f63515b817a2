//! Slice rendering for visual QC: grayscale slices with optional mask
//! overlays, written as binary PPM (always available) or PNG.
//!
//! Slices are rendered in voxel order with no anatomical reorientation;
//! the plane and index land in the output filename instead.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::check_mask_geometry;
use crate::volume::{BinaryMask3D, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Axial,
    Coronal,
    Sagittal,
}

impl Plane {
    /// The volume axis a slice index runs along (x=0, y=1, z=2).
    pub fn slice_axis(&self) -> usize {
        match self {
            Plane::Axial => 2,
            Plane::Coronal => 1,
            Plane::Sagittal => 0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Coronal => "coronal",
            Plane::Sagittal => "sagittal",
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "axial" => Ok(Plane::Axial),
            "coronal" => Ok(Plane::Coronal),
            "sagittal" => Ok(Plane::Sagittal),
            other => Err(Error::InvalidParameter(format!("unknown plane '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceIndex {
    /// Pick the slice with the largest overlay area (mid-slice without an
    /// overlay).
    Auto,
    Index(usize),
}

impl FromStr for SliceIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(SliceIndex::Auto)
        } else {
            s.parse::<usize>().map(SliceIndex::Index).map_err(|_| {
                Error::InvalidParameter(format!("slice must be 'auto' or an index, got '{s}'"))
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSpec {
    pub plane: Plane,
    pub slice_index: SliceIndex,
    pub overlay_color: [u8; 3],
    pub overlay_alpha: f64,
    /// Grayscale mapping range (lo maps to 0, hi to 255).
    pub value_range: (f64, f64),
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            plane: Plane::Axial,
            slice_index: SliceIndex::Auto,
            overlay_color: [0, 255, 0],
            overlay_alpha: 0.5,
            value_range: (0.0, 1.0),
        }
    }
}

/// An 8-bit RGB raster, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// The slice index that was actually rendered (resolves `Auto`).
    pub slice_index: usize,
}

impl RasterImage {
    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    /// Write by extension: `.ppm` or `.png`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "ppm" => {
                let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
                self.write_ppm(&mut file).map_err(|e| Error::io(path, e))
            }
            "png" => {
                let buf = image::RgbImage::from_raw(
                    self.width as u32,
                    self.height as u32,
                    self.pixels.clone(),
                )
                .expect("pixel buffer matches dimensions");
                buf.save(path)
                    .map_err(|e| Error::InvalidParameter(format!("png encode: {e}")))
            }
            other => Err(Error::InvalidParameter(format!(
                "unsupported image extension '{other}' (use ppm or png)"
            ))),
        }
    }
}

/// Resolve an `Auto` slice: the slice with the most overlay voxels, or the
/// middle slice when no overlay is given.
pub fn auto_slice(
    dims: [usize; 3],
    overlay: Option<&BinaryMask3D>,
    plane: Plane,
) -> usize {
    let axis = plane.slice_axis();
    let len = dims[axis];
    match overlay {
        None => len / 2,
        Some(mask) => {
            let mut counts = vec![0usize; len];
            let [nx, ny, _] = dims;
            for (i, &b) in mask.bits.iter().enumerate() {
                if b {
                    let coord = match axis {
                        0 => i % nx,
                        1 => (i / nx) % ny,
                        _ => i / (nx * ny),
                    };
                    counts[coord] += 1;
                }
            }
            counts
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
                .map(|(i, _)| i)
                .unwrap_or(len / 2)
        }
    }
}

/// Render one slice as grayscale with an optional alpha-blended overlay.
/// Output bytes are deterministic for fixed inputs.
pub fn render_slice(
    vol: &Volume3D,
    overlay: Option<&BinaryMask3D>,
    spec: &RenderSpec,
) -> Result<RasterImage> {
    let (lo, hi) = spec.value_range;
    if lo >= hi {
        return Err(Error::InvalidWindow { lo, hi });
    }
    if !(0.0..=1.0).contains(&spec.overlay_alpha) {
        return Err(Error::InvalidParameter(format!(
            "overlay alpha must be in [0,1], got {}",
            spec.overlay_alpha
        )));
    }
    if let Some(mask) = overlay {
        check_mask_geometry(vol, mask)?;
    }

    let dims = vol.dims();
    let axis = spec.plane.slice_axis();
    let index = match spec.slice_index {
        SliceIndex::Auto => auto_slice(dims, overlay, spec.plane),
        SliceIndex::Index(i) => i,
    };
    if index >= dims[axis] {
        return Err(Error::SliceOutOfRange {
            index,
            len: dims[axis],
        });
    }

    // In-plane axes: (u, v) -> (width, height).
    let (u_axis, v_axis) = match spec.plane {
        Plane::Axial => (0, 1),
        Plane::Coronal => (0, 2),
        Plane::Sagittal => (1, 2),
    };
    let width = dims[u_axis];
    let height = dims[v_axis];
    let span = hi - lo;
    let alpha = spec.overlay_alpha;

    let mut pixels = vec![0u8; width * height * 3];
    for v in 0..height {
        for u in 0..width {
            let mut coord = [0usize; 3];
            coord[axis] = index;
            coord[u_axis] = u;
            coord[v_axis] = v;
            let value = vol.at(coord[0], coord[1], coord[2]);
            let gray = if value.is_finite() {
                (255.0 * ((value - lo) / span).clamp(0.0, 1.0)).round() as u8
            } else {
                0
            };
            let mut rgb = [gray, gray, gray];
            if let Some(mask) = overlay {
                if mask.at(coord[0], coord[1], coord[2]) {
                    for (c, color) in rgb.iter_mut().zip(spec.overlay_color.iter()) {
                        *c = ((1.0 - alpha) * (*c as f64) + alpha * (*color as f64)).round()
                            as u8;
                    }
                }
            }
            let p = 3 * (v * width + u);
            pixels[p..p + 3].copy_from_slice(&rgb);
        }
    }

    Ok(RasterImage {
        width,
        height,
        pixels,
        slice_index: index,
    })
}

/// Canonical QC filename: `<subject>_<modality>_<plane><index>[_overlay].<ext>`.
pub fn qc_filename(
    subject: &str,
    modality: &str,
    plane: Plane,
    index: usize,
    overlay: bool,
    ext: &str,
) -> String {
    let suffix = if overlay { "_overlay" } else { "" };
    format!("{subject}_{modality}_{plane}{index}{suffix}.{ext}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;
    use crate::volume::Modality;

    fn constant_volume(dims: [usize; 3], value: f64) -> Volume3D {
        Volume3D::new(dims, [1.0; 3], vec![value; dims[0] * dims[1] * dims[2]], Modality::Cta)
            .unwrap()
    }

    #[test]
    fn constant_half_volume_renders_mid_gray() {
        let vol = constant_volume([4, 3, 2], 0.5);
        let spec = RenderSpec {
            slice_index: SliceIndex::Index(1),
            ..Default::default()
        };
        let img = render_slice(&vol, None, &spec).unwrap();
        assert_eq!((img.width, img.height), (4, 3));
        assert!(img.pixels.iter().all(|p| *p == 128));
    }

    #[test]
    fn full_overlay_with_alpha_one_is_pure_color() {
        let vol = constant_volume([4, 4, 4], 0.25);
        let mask = BinaryMask3D::filled(vol.geometry(), true);
        let spec = RenderSpec {
            slice_index: SliceIndex::Index(2),
            overlay_alpha: 1.0,
            overlay_color: [0, 255, 0],
            ..Default::default()
        };
        let img = render_slice(&vol, Some(&mask), &spec).unwrap();
        for px in img.pixels.chunks_exact(3) {
            assert_eq!(px, &[0, 255, 0]);
        }
    }

    #[test]
    fn alpha_zero_matches_no_overlay() {
        let vol = constant_volume([5, 5, 5], 0.8);
        let mask = BinaryMask3D::filled(vol.geometry(), true);
        let spec = RenderSpec {
            slice_index: SliceIndex::Index(3),
            overlay_alpha: 0.0,
            ..Default::default()
        };
        let with = render_slice(&vol, Some(&mask), &spec).unwrap();
        let without = render_slice(&vol, None, &spec).unwrap();
        assert_eq!(with.pixels, without.pixels);
    }

    #[test]
    fn auto_slice_maximizes_overlay_area() {
        // Overlay concentrated on z = 5, thinner on z = 2.
        let g = Geometry::from_spacing([8, 8, 8], [1.0; 3]);
        let mut bits = vec![false; g.voxel_count()];
        for y in 0..8 {
            for x in 0..8 {
                bits[g.index(x, y, 5)] = true;
            }
        }
        bits[g.index(0, 0, 2)] = true;
        let mask = BinaryMask3D::from_bits(g, bits).unwrap();
        assert_eq!(auto_slice([8, 8, 8], Some(&mask), Plane::Axial), 5);
        assert_eq!(auto_slice([8, 8, 8], None, Plane::Axial), 4);

        let vol = constant_volume([8, 8, 8], 0.5);
        let img = render_slice(&vol, Some(&mask), &RenderSpec::default()).unwrap();
        assert_eq!(img.slice_index, 5);
    }

    #[test]
    fn plane_dimensions_follow_the_volume() {
        let vol = constant_volume([6, 5, 4], 0.2);
        for (plane, w, h) in [
            (Plane::Axial, 6, 5),
            (Plane::Coronal, 6, 4),
            (Plane::Sagittal, 5, 4),
        ] {
            let spec = RenderSpec {
                plane,
                slice_index: SliceIndex::Index(0),
                ..Default::default()
            };
            let img = render_slice(&vol, None, &spec).unwrap();
            assert_eq!((img.width, img.height), (w, h));
        }
    }

    #[test]
    fn out_of_range_slice_is_an_error() {
        let vol = constant_volume([4, 4, 4], 0.0);
        let spec = RenderSpec {
            slice_index: SliceIndex::Index(4),
            ..Default::default()
        };
        assert!(matches!(
            render_slice(&vol, None, &spec),
            Err(Error::SliceOutOfRange { index: 4, len: 4 })
        ));
    }

    #[test]
    fn ppm_bytes_are_deterministic_and_well_formed() {
        let mut vol = constant_volume([2, 2, 1], 0.0);
        vol.voxels = vec![0.0, 1.0, 0.5, f64::NAN];
        let spec = RenderSpec {
            slice_index: SliceIndex::Index(0),
            ..Default::default()
        };
        let a = render_slice(&vol, None, &spec).unwrap();
        let b = render_slice(&vol, None, &spec).unwrap();
        assert_eq!(a, b);
        let mut bytes = Vec::new();
        a.write_ppm(&mut bytes).unwrap();
        let expected: &[u8] = &[
            b'P', b'6', b'\n', b'2', b' ', b'2', b'\n', b'2', b'5', b'5', b'\n', 0, 0, 0, 255,
            255, 255, 128, 128, 128, 0, 0, 0,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn qc_filename_convention() {
        assert_eq!(
            qc_filename("sub-001", "cta", Plane::Axial, 12, true, "ppm"),
            "sub-001_cta_axial12_overlay.ppm"
        );
        assert_eq!(
            qc_filename("s", "mask", Plane::Sagittal, 3, false, "png"),
            "s_mask_sagittal3.png"
        );
    }
}
