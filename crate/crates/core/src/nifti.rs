//! NIfTI-1 reading and writing.
//!
//! Supports single-file volumes (`.nii`, magic `n+1\0`), optionally gzip
//! wrapped (detected by magic bytes, not extension). Endianness is detected
//! from `sizeof_hdr`. Two-file pairs (`ni1\0`), ANALYZE, and NIfTI-2 are
//! rejected. Header extensions are preserved as opaque bytes so that
//! read-modify-write round-trips keep them.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::volume::{Modality, Volume3D};

/// NIfTI-1 header size in bytes.
pub const HEADER_SIZE: usize = 348;
/// Smallest legal voxel-data offset for single-file NIfTI-1.
pub const MIN_VOX_OFFSET: u64 = 352;

const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// On-disk scalar types supported by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Datatype::Uint8),
            4 => Ok(Datatype::Int16),
            8 => Ok(Datatype::Int32),
            16 => Ok(Datatype::Float32),
            64 => Ok(Datatype::Float64),
            other => Err(Error::UnsupportedDatatype(other)),
        }
    }

    pub fn code(&self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn bitpix(&self) -> i16 {
        match self {
            Datatype::Uint8 => 8,
            Datatype::Int16 => 16,
            Datatype::Int32 => 32,
            Datatype::Float32 => 32,
            Datatype::Float64 => 64,
        }
    }

    pub fn byte_size(&self) -> usize {
        (self.bitpix() / 8) as usize
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Datatype::Uint8 => "uint8",
            Datatype::Int16 => "int16",
            Datatype::Int32 => "int32",
            Datatype::Float32 => "float32",
            Datatype::Float64 => "float64",
        }
    }

    pub const ALL: [Datatype; 5] = [
        Datatype::Uint8,
        Datatype::Int16,
        Datatype::Int32,
        Datatype::Float32,
        Datatype::Float64,
    ];
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Datatype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uint8" => Ok(Datatype::Uint8),
            "int16" => Ok(Datatype::Int16),
            "int32" => Ok(Datatype::Int32),
            "float32" => Ok(Datatype::Float32),
            "float64" => Ok(Datatype::Float64),
            other => Err(Error::InvalidParameter(format!(
                "unknown datatype '{other}'"
            ))),
        }
    }
}

/// Parsed NIfTI-1 header, reduced to the fields the pipeline uses.
///
/// `scl_slope`/`scl_inter` hold the raw on-disk values; the voxels of a
/// `Volume3D` already have the scaling applied (slope 0 treated as 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dims: [usize; 3],
    pub pixdim: [f64; 3],
    pub affine: [[f64; 4]; 4],
    pub datatype: Datatype,
    pub scl_slope: f64,
    pub scl_inter: f64,
    pub vox_offset: u64,
    /// Raw bytes between the 348-byte header and the voxel payload
    /// (extender code plus any extensions), kept opaque.
    pub extensions: Vec<u8>,
}

impl NiftiHeader {
    /// Header for a volume created in memory: axis-aligned affine, no
    /// scaling, no extensions.
    pub fn synthetic(dims: [usize; 3], spacing: [f64; 3]) -> Self {
        let geometry = Geometry::from_spacing(dims, spacing);
        NiftiHeader {
            dims,
            pixdim: spacing,
            affine: geometry.affine,
            datatype: Datatype::Float64,
            scl_slope: 0.0,
            scl_inter: 0.0,
            vox_offset: MIN_VOX_OFFSET,
            extensions: Vec::new(),
        }
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            dims: self.dims,
            spacing: self.pixdim,
            affine: self.affine,
        }
    }
}

/// Read a NIfTI-1 volume from disk. Gzip wrapping is detected from the
/// leading magic bytes. The modality tag is set to `Other`.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    read_volume_as(path, Modality::Other)
}

/// `read_volume` with an explicit modality tag.
pub fn read_volume_as(path: impl AsRef<Path>, modality: Modality) -> Result<Volume3D> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bytes = if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut decoder = MultiGzDecoder::new(raw.as_slice());
        let mut out = Vec::new();
        decoder
            .read_to_end(&mut out)
            .map_err(|e| Error::MalformedHeader(format!("gzip stream: {e}")))?;
        out
    } else {
        raw
    };
    let mut vol = decode_bytes(&bytes)?;
    vol.modality = modality;
    Ok(vol)
}

/// Decode an in-memory (already decompressed) NIfTI-1 byte stream.
pub fn decode_bytes(bytes: &[u8]) -> Result<Volume3D> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "file holds {} bytes, header needs {HEADER_SIZE}",
            bytes.len()
        )));
    }
    let le = LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]);
    let be = BigEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]);
    match (le, be) {
        (348, _) => decode_with::<LittleEndian>(bytes),
        (_, 348) => decode_with::<BigEndian>(bytes),
        _ => Err(Error::MalformedHeader(format!(
            "sizeof_hdr is {le} (LE) / {be} (BE), expected 348"
        ))),
    }
}

fn decode_with<E: ByteOrder>(bytes: &[u8]) -> Result<Volume3D> {
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic == MAGIC_PAIR {
        return Err(Error::MalformedHeader(
            "two-file NIfTI-1 pairs (magic 'ni1') are not supported".to_string(),
        ));
    }
    if magic != MAGIC_SINGLE {
        return Err(Error::MalformedHeader(format!(
            "bad magic {:?}, expected 'n+1'",
            &magic[..3]
        )));
    }

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = E::read_i16(&bytes[offsets::DIM + 2 * i..]);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::MalformedHeader(format!("dim[0] = {ndim}")));
    }
    let ndim = ndim as usize;
    if ndim < 3 {
        return Err(Error::UnsupportedDimensionality { ndim });
    }
    // 4-D and higher are accepted only when every trailing dim is a
    // singleton, and are collapsed to 3-D.
    for d in dim.iter().take(ndim + 1).skip(4) {
        if *d != 1 {
            return Err(Error::UnsupportedDimensionality { ndim });
        }
    }
    let mut dims = [0usize; 3];
    for i in 0..3 {
        let d = dim[i + 1];
        if d < 1 {
            return Err(Error::MalformedHeader(format!(
                "dim[{}] = {d}, must be >= 1",
                i + 1
            )));
        }
        dims[i] = d as usize;
    }

    let datatype = Datatype::from_code(E::read_i16(&bytes[offsets::DATATYPE..]))?;
    let bitpix = E::read_i16(&bytes[offsets::BITPIX..]);
    if bitpix != datatype.bitpix() {
        return Err(Error::MalformedHeader(format!(
            "bitpix {bitpix} does not match datatype {datatype} ({})",
            datatype.bitpix()
        )));
    }

    let mut pixdim_raw = [0f32; 8];
    for (i, p) in pixdim_raw.iter_mut().enumerate() {
        *p = E::read_f32(&bytes[offsets::PIXDIM + 4 * i..]);
    }
    let pixdim = [
        pixdim_raw[1] as f64,
        pixdim_raw[2] as f64,
        pixdim_raw[3] as f64,
    ];

    let vox_offset_raw = E::read_f32(&bytes[offsets::VOX_OFFSET..]);
    if !vox_offset_raw.is_finite() || vox_offset_raw.fract() != 0.0 || vox_offset_raw < 0.0 {
        return Err(Error::MalformedHeader(format!(
            "vox_offset {vox_offset_raw} is not a non-negative integer"
        )));
    }
    let vox_offset = vox_offset_raw as u64;
    if vox_offset < MIN_VOX_OFFSET {
        return Err(Error::MalformedHeader(format!(
            "vox_offset {vox_offset} < {MIN_VOX_OFFSET}"
        )));
    }
    if vox_offset as usize > bytes.len() {
        return Err(Error::MalformedHeader(format!(
            "vox_offset {vox_offset} beyond end of file ({} bytes)",
            bytes.len()
        )));
    }

    let scl_slope = E::read_f32(&bytes[offsets::SCL_SLOPE..]);
    let scl_inter = E::read_f32(&bytes[offsets::SCL_INTER..]);
    // Slope 0 means "no scaling" per the NIfTI convention; non-finite
    // slope/intercept values occur in the wild and are treated the same way.
    let slope = if scl_slope == 0.0 || !scl_slope.is_finite() {
        1.0
    } else {
        scl_slope as f64
    };
    let inter = if scl_inter.is_finite() {
        scl_inter as f64
    } else {
        0.0
    };

    let affine = read_affine::<E>(bytes, &pixdim_raw);

    let n_voxels = dims[0] * dims[1] * dims[2];
    let payload = &bytes[vox_offset as usize..];
    let needed = n_voxels * datatype.byte_size();
    if payload.len() < needed {
        return Err(Error::DimMismatch {
            expected: n_voxels,
            actual: payload.len() / datatype.byte_size(),
        });
    }
    let payload = &payload[..needed];

    let mut voxels = Vec::with_capacity(n_voxels);
    match datatype {
        Datatype::Uint8 => voxels.extend(payload.iter().map(|b| *b as f64)),
        Datatype::Int16 => {
            voxels.extend(payload.chunks_exact(2).map(|c| E::read_i16(c) as f64))
        }
        Datatype::Int32 => {
            voxels.extend(payload.chunks_exact(4).map(|c| E::read_i32(c) as f64))
        }
        Datatype::Float32 => {
            voxels.extend(payload.chunks_exact(4).map(|c| E::read_f32(c) as f64))
        }
        Datatype::Float64 => voxels.extend(payload.chunks_exact(8).map(|c| E::read_f64(c))),
    }
    if slope != 1.0 || inter != 0.0 {
        for v in &mut voxels {
            *v = *v * slope + inter;
        }
    }

    let header = NiftiHeader {
        dims,
        pixdim,
        affine,
        datatype,
        scl_slope: scl_slope as f64,
        scl_inter: scl_inter as f64,
        vox_offset,
        extensions: bytes[HEADER_SIZE..vox_offset as usize].to_vec(),
    };
    Volume3D::from_parts(header, voxels, Modality::Other)
}

fn read_affine<E: ByteOrder>(bytes: &[u8], pixdim_raw: &[f32; 8]) -> [[f64; 4]; 4] {
    let qform_code = E::read_i16(&bytes[offsets::QFORM_CODE..]);
    let sform_code = E::read_i16(&bytes[offsets::SFORM_CODE..]);
    let mut affine = [[0.0f64; 4]; 4];
    affine[3][3] = 1.0;

    if sform_code > 0 {
        for row in 0..3 {
            for col in 0..4 {
                let off = offsets::SROW_X + 16 * row + 4 * col;
                affine[row][col] = E::read_f32(&bytes[off..]) as f64;
            }
        }
        return affine;
    }
    if qform_code > 0 {
        let b = E::read_f32(&bytes[offsets::QUATERN_B..]) as f64;
        let c = E::read_f32(&bytes[offsets::QUATERN_B + 4..]) as f64;
        let d = E::read_f32(&bytes[offsets::QUATERN_B + 8..]) as f64;
        let a = (1.0 - b * b - c * c - d * d).max(0.0).sqrt();
        let qfac = if pixdim_raw[0] < 0.0 { -1.0 } else { 1.0 };
        let rot = [
            [
                a * a + b * b - c * c - d * d,
                2.0 * b * c - 2.0 * a * d,
                2.0 * b * d + 2.0 * a * c,
            ],
            [
                2.0 * b * c + 2.0 * a * d,
                a * a + c * c - b * b - d * d,
                2.0 * c * d - 2.0 * a * b,
            ],
            [
                2.0 * b * d - 2.0 * a * c,
                2.0 * c * d + 2.0 * a * b,
                a * a + d * d - b * b - c * c,
            ],
        ];
        let scale = [
            pixdim_raw[1] as f64,
            pixdim_raw[2] as f64,
            pixdim_raw[3] as f64 * qfac,
        ];
        for row in 0..3 {
            for col in 0..3 {
                affine[row][col] = rot[row][col] * scale[col];
            }
            affine[row][3] = E::read_f32(&bytes[offsets::QOFFSET_X + 4 * row..]) as f64;
        }
        return affine;
    }
    // Neither transform present: fall back to a scaled identity.
    for i in 0..3 {
        affine[i][i] = pixdim_raw[i + 1] as f64;
    }
    affine
}

/// Serialize a volume to NIfTI-1 bytes (uncompressed) with the requested
/// on-disk datatype. Values must be representable exactly enough that the
/// write is lossless for integral targets; see [`write_volume`].
pub fn encode_bytes(vol: &Volume3D, datatype: Datatype) -> Result<Vec<u8>> {
    check_representable(&vol.voxels, datatype)?;

    let extensions: &[u8] = if vol.header.extensions.is_empty() {
        &[0u8; 4]
    } else {
        &vol.header.extensions
    };
    let vox_offset = (HEADER_SIZE + extensions.len()) as u64;

    let mut header = vec![0u8; HEADER_SIZE];
    LittleEndian::write_i32(&mut header[offsets::SIZEOF_HDR..], 348);
    let dims = vol.header.dims;
    let dim: [i16; 8] = [
        3,
        dims[0] as i16,
        dims[1] as i16,
        dims[2] as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut header[offsets::DIM + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut header[offsets::DATATYPE..], datatype.code());
    LittleEndian::write_i16(&mut header[offsets::BITPIX..], datatype.bitpix());
    let pixdim: [f32; 8] = [
        1.0,
        vol.header.pixdim[0] as f32,
        vol.header.pixdim[1] as f32,
        vol.header.pixdim[2] as f32,
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut header[offsets::PIXDIM + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut header[offsets::VOX_OFFSET..], vox_offset as f32);
    // Voxels are already rescaled in memory; write identity scaling.
    LittleEndian::write_f32(&mut header[offsets::SCL_SLOPE..], 1.0);
    LittleEndian::write_f32(&mut header[offsets::SCL_INTER..], 0.0);
    header[offsets::XYZT_UNITS] = 10; // mm + s
    LittleEndian::write_i16(&mut header[offsets::QFORM_CODE..], 0);
    LittleEndian::write_i16(&mut header[offsets::SFORM_CODE..], 1);
    for row in 0..3 {
        for col in 0..4 {
            let off = offsets::SROW_X + 16 * row + 4 * col;
            LittleEndian::write_f32(&mut header[off..], vol.header.affine[row][col] as f32);
        }
    }
    header[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(MAGIC_SINGLE);

    let n = vol.voxels.len();
    let mut out = header;
    out.reserve(extensions.len() + n * datatype.byte_size());
    out.extend_from_slice(extensions);
    match datatype {
        Datatype::Uint8 => out.extend(vol.voxels.iter().map(|v| *v as u8)),
        Datatype::Int16 => {
            let mut buf = vec![0u8; n * 2];
            for (i, v) in vol.voxels.iter().enumerate() {
                LittleEndian::write_i16(&mut buf[2 * i..], *v as i16);
            }
            out.extend_from_slice(&buf);
        }
        Datatype::Int32 => {
            let mut buf = vec![0u8; n * 4];
            for (i, v) in vol.voxels.iter().enumerate() {
                LittleEndian::write_i32(&mut buf[4 * i..], *v as i32);
            }
            out.extend_from_slice(&buf);
        }
        Datatype::Float32 => {
            let mut buf = vec![0u8; n * 4];
            for (i, v) in vol.voxels.iter().enumerate() {
                LittleEndian::write_f32(&mut buf[4 * i..], *v as f32);
            }
            out.extend_from_slice(&buf);
        }
        Datatype::Float64 => {
            let mut buf = vec![0u8; n * 8];
            for (i, v) in vol.voxels.iter().enumerate() {
                LittleEndian::write_f64(&mut buf[8 * i..], *v);
            }
            out.extend_from_slice(&buf);
        }
    }
    Ok(out)
}

/// Write a volume to disk with the requested on-disk datatype. Paths ending
/// in `.gz` are gzip compressed.
///
/// Values that the datatype cannot hold exactly are an error, never clamped:
/// integral targets require integral in-range values, `float32` requires
/// magnitudes within f32 range.
pub fn write_volume(vol: &Volume3D, path: impl AsRef<Path>, datatype: Datatype) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_bytes(vol, datatype)?;
    let gzip = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    if gzip {
        let mut enc = GzEncoder::new(file, Compression::new(6));
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?;
    } else {
        let mut file = file;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn check_representable(voxels: &[f64], datatype: Datatype) -> Result<()> {
    let fail = |value: f64| Error::RangeOverflow { value, datatype };
    match datatype {
        Datatype::Float64 => Ok(()),
        Datatype::Float32 => {
            for &v in voxels {
                if v.is_finite() && v.abs() > f32::MAX as f64 {
                    return Err(fail(v));
                }
            }
            Ok(())
        }
        Datatype::Uint8 => check_integral(voxels, 0.0, u8::MAX as f64, fail),
        Datatype::Int16 => check_integral(voxels, i16::MIN as f64, i16::MAX as f64, fail),
        Datatype::Int32 => check_integral(voxels, i32::MIN as f64, i32::MAX as f64, fail),
    }
}

fn check_integral(
    voxels: &[f64],
    lo: f64,
    hi: f64,
    fail: impl Fn(f64) -> Error,
) -> Result<()> {
    for &v in voxels {
        if !v.is_finite() || v.fract() != 0.0 || v < lo || v > hi {
            return Err(fail(v));
        }
    }
    Ok(())
}
