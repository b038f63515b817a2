//! Python bindings for the ctprep library: volumes, masks, the
//! preprocessing transforms, vessel segmentation, and evaluation metrics.
//!
//! Build with `cargo build -p ctprep-python --release`; the resulting
//! `libctprep_py.so` imports as the `ctprep_py` module (see
//! `python/smoke_test.py`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ctprep::components::Connectivity;
use ctprep::preprocess::DEFAULT_WINDOWS;
use ctprep::render::{Plane, RenderSpec, SliceIndex};
use ctprep::vessel::VesselSegParams;
use ctprep::volume::Modality;
use ctprep::{Datatype, WindowSpec};

fn to_py_err(e: ctprep::Error) -> PyErr {
    match e {
        ctprep::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_modality(s: &str) -> PyResult<Modality> {
    s.parse::<Modality>().map_err(to_py_err)
}

fn parse_connectivity(c: u8) -> PyResult<Connectivity> {
    Connectivity::try_from(c).map_err(PyValueError::new_err)
}

/// A 3-D scalar volume (voxels in x-fastest order, 64-bit values).
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Volume {
    inner: ctprep::Volume3D,
}

#[pymethods]
impl Volume {
    #[new]
    fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        values: Vec<f64>,
        modality: &str,
    ) -> PyResult<Self> {
        let inner = ctprep::Volume3D::new(
            [dims.0, dims.1, dims.2],
            [spacing.0, spacing.1, spacing.2],
            values,
            parse_modality(modality)?,
        )
        .map_err(to_py_err)?;
        Ok(Volume { inner })
    }

    /// Read a NIfTI-1 volume (`.nii` or `.nii.gz`).
    #[staticmethod]
    #[pyo3(signature = (path, modality=None))]
    fn read(path: PathBuf, modality: Option<&str>) -> PyResult<Self> {
        let modality = match modality {
            Some(m) => parse_modality(m)?,
            None => Modality::Other,
        };
        let inner = ctprep::read_volume_as(&path, modality).map_err(to_py_err)?;
        Ok(Volume { inner })
    }

    /// Write as NIfTI-1 with the given on-disk datatype
    /// (uint8/int16/int32/float32/float64); `.gz` paths are compressed.
    #[pyo3(signature = (path, datatype="float32"))]
    fn write(&self, path: PathBuf, datatype: &str) -> PyResult<()> {
        let datatype: Datatype = datatype.parse().map_err(to_py_err)?;
        ctprep::write_volume(&self.inner, &path, datatype).map_err(to_py_err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let [x, y, z] = self.inner.dims();
        (x, y, z)
    }

    #[getter]
    fn spacing(&self) -> (f64, f64, f64) {
        let [x, y, z] = self.inner.spacing();
        (x, y, z)
    }

    #[getter]
    fn modality(&self) -> String {
        self.inner.modality.to_string()
    }

    #[setter]
    fn set_modality(&mut self, modality: &str) -> PyResult<()> {
        self.inner.modality = parse_modality(modality)?;
        Ok(())
    }

    /// Voxel values in x-fastest scan order.
    fn values(&self) -> Vec<f64> {
        self.inner.voxels.clone()
    }

    fn value_at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.inner.at(x, y, z)
    }

    /// (min, max) over finite voxels, or None if no voxel is finite.
    fn finite_range(&self) -> Option<(f64, f64)> {
        self.inner.finite_range()
    }

    fn __repr__(&self) -> String {
        let [x, y, z] = self.inner.dims();
        format!(
            "Volume(dims=({x}, {y}, {z}), modality='{}')",
            self.inner.modality
        )
    }
}

/// A boolean mask sharing a volume's grid.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Mask {
    inner: ctprep::BinaryMask3D,
}

#[pymethods]
impl Mask {
    /// Build from per-voxel booleans on the same grid as `like`.
    #[staticmethod]
    fn from_values(like: &Volume, values: Vec<bool>) -> PyResult<Self> {
        let inner = ctprep::BinaryMask3D::from_bits(like.inner.geometry(), values)
            .map_err(to_py_err)?;
        Ok(Mask { inner })
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        let [x, y, z] = self.inner.dims();
        (x, y, z)
    }

    fn count(&self) -> usize {
        self.inner.count_true()
    }

    fn values(&self) -> Vec<bool> {
        self.inner.bits.clone()
    }

    fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.inner.at(x, y, z)
    }

    fn is_subset_of(&self, other: &Mask) -> bool {
        self.inner.is_subset_of(&other.inner)
    }

    /// Lift to a 0/1-valued volume (writable as a model input channel).
    fn to_volume(&self) -> Volume {
        Volume {
            inner: ctprep::vessel_channel(&self.inner),
        }
    }

    fn __repr__(&self) -> String {
        let [x, y, z] = self.inner.dims();
        format!("Mask(dims=({x}, {y}, {z}), true={})", self.inner.count_true())
    }
}

/// Foreground percentile/mean/std statistics for baseline normalization.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct ForegroundStats {
    inner: ctprep::ForegroundStats,
}

#[pymethods]
impl ForegroundStats {
    #[getter]
    fn p_low(&self) -> f64 {
        self.inner.p_low
    }
    #[getter]
    fn p_high(&self) -> f64 {
        self.inner.p_high
    }
    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean
    }
    #[getter]
    fn std(&self) -> f64 {
        self.inner.std
    }
    #[getter]
    fn n_voxels(&self) -> usize {
        self.inner.n_voxels
    }

    fn __repr__(&self) -> String {
        format!(
            "ForegroundStats(p_low={}, p_high={}, mean={}, std={}, n_voxels={})",
            self.inner.p_low, self.inner.p_high, self.inner.mean, self.inner.std,
            self.inner.n_voxels
        )
    }
}

#[pyfunction]
fn clip(vol: &Volume, lo: f64, hi: f64) -> PyResult<Volume> {
    Ok(Volume {
        inner: ctprep::clip(&vol.inner, lo, hi).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn apply_mask(vol: &Volume, mask: &Mask) -> PyResult<Volume> {
    Ok(Volume {
        inner: ctprep::apply_mask(&vol.inner, &mask.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn subtract(a: &Volume, b: &Volume) -> PyResult<Volume> {
    Ok(Volume {
        inner: ctprep::subtract(&a.inner, &b.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn band_suppress(vol: &Volume, tau_low: f64, tau_high: f64) -> PyResult<Volume> {
    Ok(Volume {
        inner: ctprep::band_suppress(&vol.inner, tau_low, tau_high).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn nonzero_mask(vol: &Volume) -> Mask {
    Mask {
        inner: ctprep::nonzero_mask(&vol.inner),
    }
}

#[pyfunction]
fn geometry_compatible(a: &Volume, b: &Volume) -> bool {
    ctprep::geometry_compatible(&a.inner, &b.inner)
}

/// Window + min-max normalize to [0,1] inside the brain mask; the window
/// defaults to the clinical table entry for the volume's modality.
#[pyfunction]
#[pyo3(signature = (vol, brain, lo=None, hi=None))]
fn clinical_window(vol: &Volume, brain: &Mask, lo: Option<f64>, hi: Option<f64>) -> PyResult<Volume> {
    let spec = match (lo, hi) {
        (Some(lo), Some(hi)) => WindowSpec::new(vol.inner.modality, lo, hi).map_err(to_py_err)?,
        (None, None) => ctprep::preprocess::default_window(vol.inner.modality).ok_or_else(|| {
            PyValueError::new_err(format!(
                "no default window for modality '{}'; pass lo and hi",
                vol.inner.modality
            ))
        })?,
        _ => return Err(PyValueError::new_err("pass both lo and hi, or neither")),
    };
    Ok(Volume {
        inner: ctprep::clinical_window(&vol.inner, &spec, &brain.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (vol, brain, bins=256))]
fn equalize_foreground(vol: &Volume, brain: &Mask, bins: usize) -> PyResult<Volume> {
    Ok(Volume {
        inner: ctprep::equalize_foreground(&vol.inner, &brain.inner, bins).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn compute_foreground_stats(volumes: Vec<Volume>, masks: Vec<Mask>) -> PyResult<ForegroundStats> {
    let vols: Vec<ctprep::Volume3D> = volumes.into_iter().map(|v| v.inner).collect();
    let fgs: Vec<ctprep::BinaryMask3D> = masks.into_iter().map(|m| m.inner).collect();
    Ok(ForegroundStats {
        inner: ctprep::compute_foreground_stats(&vols, &fgs).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn baseline_normalize(vol: &Volume, stats: &ForegroundStats) -> PyResult<Volume> {
    Ok(Volume {
        inner: ctprep::baseline_normalize(&vol.inner, &stats.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn fallback_skull_strip(ncct: &Volume) -> PyResult<Mask> {
    Ok(Mask {
        inner: ctprep::fallback_skull_strip(&ncct.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (cta, ncct, brain, hu_lo=0.0, hu_hi=400.0, tau_low=50.0, tau_high=400.0, s_min=25, connectivity=26))]
#[allow(clippy::too_many_arguments)]
fn segment_vessels(
    cta: &Volume,
    ncct: &Volume,
    brain: &Mask,
    hu_lo: f64,
    hu_hi: f64,
    tau_low: f64,
    tau_high: f64,
    s_min: usize,
    connectivity: u8,
) -> PyResult<Mask> {
    let params = VesselSegParams {
        hu_window: (hu_lo, hu_hi),
        tau_low,
        tau_high,
        s_min,
        connectivity: parse_connectivity(connectivity)?,
    };
    Ok(Mask {
        inner: ctprep::segment_vessels(&cta.inner, &ncct.inner, &brain.inner, &params)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (mask, connectivity=26))]
fn count_components(mask: &Mask, connectivity: u8) -> PyResult<usize> {
    Ok(ctprep::count_components(
        &mask.inner,
        parse_connectivity(connectivity)?,
    ))
}

#[pyfunction]
#[pyo3(signature = (mask, connectivity=26))]
fn component_sizes(mask: &Mask, connectivity: u8) -> PyResult<Vec<usize>> {
    let lm = ctprep::label_components(&mask.inner, parse_connectivity(connectivity)?);
    Ok(lm.component_sizes)
}

#[pyfunction]
#[pyo3(signature = (mask, s_min, connectivity=26))]
fn filter_by_size(mask: &Mask, s_min: usize, connectivity: u8) -> PyResult<Mask> {
    let lm = ctprep::label_components(&mask.inner, parse_connectivity(connectivity)?);
    Ok(Mask {
        inner: ctprep::filter_by_size(&lm, s_min),
    })
}

#[pyfunction]
fn dice(pred: &Mask, gt: &Mask) -> PyResult<f64> {
    ctprep::dice(&pred.inner, &gt.inner).map_err(to_py_err)
}

#[pyfunction]
fn avd(pred: &Mask, gt: &Mask) -> PyResult<f64> {
    ctprep::avd(&pred.inner, &gt.inner).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (pred, gt, connectivity=26))]
fn lesionwise_f1(pred: &Mask, gt: &Mask, connectivity: u8) -> PyResult<(f64, (usize, usize, usize))> {
    let (f1, m) = ctprep::lesionwise_f1(&pred.inner, &gt.inner, parse_connectivity(connectivity)?)
        .map_err(to_py_err)?;
    Ok((f1, (m.true_positives, m.false_positives, m.false_negatives)))
}

#[pyfunction]
#[pyo3(signature = (pred, gt, connectivity=26))]
fn alcd(pred: &Mask, gt: &Mask, connectivity: u8) -> PyResult<usize> {
    ctprep::alcd(&pred.inner, &gt.inner, parse_connectivity(connectivity)?).map_err(to_py_err)
}

/// All four metrics as a dict: dice, avd_ml, f1_lesionwise, alcd,
/// n_pred_lesions, n_gt_lesions.
#[pyfunction]
#[pyo3(signature = (pred, gt, connectivity=26, min_overlap=1))]
fn evaluate(
    py: Python<'_>,
    pred: &Mask,
    gt: &Mask,
    connectivity: u8,
    min_overlap: usize,
) -> PyResult<Py<PyAny>> {
    let report = ctprep::evaluate(
        &pred.inner,
        &gt.inner,
        parse_connectivity(connectivity)?,
        min_overlap,
    )
    .map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("dice", report.dice)?;
    dict.set_item("avd_ml", report.avd_ml)?;
    dict.set_item("f1_lesionwise", report.f1_lesionwise)?;
    dict.set_item("alcd", report.alcd)?;
    dict.set_item("n_pred_lesions", report.n_pred_lesions)?;
    dict.set_item("n_gt_lesions", report.n_gt_lesions)?;
    Ok(dict.into())
}

#[pyfunction]
fn range_kept_percent(lo: f64, hi: f64, ref_lo: f64, ref_hi: f64) -> PyResult<f64> {
    let spec = WindowSpec::new(Modality::Other, lo, hi).map_err(to_py_err)?;
    ctprep::range_kept_percent(&spec, (ref_lo, ref_hi)).map_err(to_py_err)
}

/// The clinical window table as `{modality: (lo, hi)}`.
#[pyfunction]
fn default_windows() -> BTreeMap<String, (f64, f64)> {
    DEFAULT_WINDOWS
        .iter()
        .map(|(m, lo, hi)| (m.to_string(), (*lo, *hi)))
        .collect()
}

/// Render one slice to a `.ppm` or `.png` file; returns the slice index
/// that was rendered (`slice_index=None` picks it automatically).
#[pyfunction]
#[pyo3(signature = (vol, path, plane="axial", slice_index=None, overlay=None, alpha=0.5, lo=0.0, hi=1.0))]
#[allow(clippy::too_many_arguments)]
fn render_slice(
    vol: &Volume,
    path: PathBuf,
    plane: &str,
    slice_index: Option<usize>,
    overlay: Option<&Mask>,
    alpha: f64,
    lo: f64,
    hi: f64,
) -> PyResult<usize> {
    let spec = RenderSpec {
        plane: plane.parse::<Plane>().map_err(to_py_err)?,
        slice_index: match slice_index {
            Some(i) => SliceIndex::Index(i),
            None => SliceIndex::Auto,
        },
        overlay_alpha: alpha,
        value_range: (lo, hi),
        ..Default::default()
    };
    let image = ctprep::render_slice(&vol.inner, overlay.map(|m| &m.inner), &spec)
        .map_err(to_py_err)?;
    image.save(&path).map_err(to_py_err)?;
    Ok(image.slice_index)
}

#[pymodule]
fn ctprep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Volume>()?;
    m.add_class::<Mask>()?;
    m.add_class::<ForegroundStats>()?;
    m.add_function(wrap_pyfunction!(clip, m)?)?;
    m.add_function(wrap_pyfunction!(apply_mask, m)?)?;
    m.add_function(wrap_pyfunction!(subtract, m)?)?;
    m.add_function(wrap_pyfunction!(band_suppress, m)?)?;
    m.add_function(wrap_pyfunction!(nonzero_mask, m)?)?;
    m.add_function(wrap_pyfunction!(geometry_compatible, m)?)?;
    m.add_function(wrap_pyfunction!(clinical_window, m)?)?;
    m.add_function(wrap_pyfunction!(equalize_foreground, m)?)?;
    m.add_function(wrap_pyfunction!(compute_foreground_stats, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_normalize, m)?)?;
    m.add_function(wrap_pyfunction!(fallback_skull_strip, m)?)?;
    m.add_function(wrap_pyfunction!(segment_vessels, m)?)?;
    m.add_function(wrap_pyfunction!(count_components, m)?)?;
    m.add_function(wrap_pyfunction!(component_sizes, m)?)?;
    m.add_function(wrap_pyfunction!(filter_by_size, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(avd, m)?)?;
    m.add_function(wrap_pyfunction!(lesionwise_f1, m)?)?;
    m.add_function(wrap_pyfunction!(alcd, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(range_kept_percent, m)?)?;
    m.add_function(wrap_pyfunction!(default_windows, m)?)?;
    m.add_function(wrap_pyfunction!(render_slice, m)?)?;
    Ok(())
}
