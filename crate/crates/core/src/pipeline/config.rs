//! Pipeline configuration: JSON file with compiled-in defaults, key=value
//! overrides, and validation. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::preprocess::{WindowSpec, DEFAULT_EQUALIZE_BINS, DEFAULT_WINDOWS};
use crate::vessel::VesselSegParams;
use crate::volume::Modality;

/// Which preprocessing the batch produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "clinical")]
    Clinical,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "clinical+vessels")]
    ClinicalVessels,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Clinical => "clinical",
            Mode::Baseline => "baseline",
            Mode::ClinicalVessels => "clinical+vessels",
        };
        f.write_str(s)
    }
}

/// Foreground definition for baseline statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineForeground {
    /// Brain-mask voxels.
    Brain,
    /// Ground-truth lesion voxels (requires `gt_lesion` in the manifest).
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Per-modality clinical windows as `modality -> [lo, hi]`.
    pub windows: BTreeMap<Modality, (f64, f64)>,
    pub equalize_bins: usize,
    pub vessel_params: VesselSegParams,
    /// Connectivity used for lesion metrics.
    pub connectivity: Connectivity,
    pub mode: Mode,
    pub parallel_subjects: usize,
    /// Opt-in for the threshold+morphology fallback brain mask; the
    /// fallback is not clinically valid, so the default is to error when a
    /// subject has no mask file.
    pub allow_fallback_mask: bool,
    pub baseline_foreground: BaselineForeground,
    /// Minimum shared voxels for a predicted lesion to count as detecting a
    /// ground-truth lesion.
    pub min_lesion_overlap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let windows = DEFAULT_WINDOWS
            .iter()
            .map(|(m, lo, hi)| (*m, (*lo, *hi)))
            .collect();
        PipelineConfig {
            windows,
            equalize_bins: DEFAULT_EQUALIZE_BINS,
            vessel_params: VesselSegParams::default(),
            connectivity: Connectivity::TwentySix,
            mode: Mode::Clinical,
            parallel_subjects: 1,
            allow_fallback_mask: false,
            baseline_foreground: BaselineForeground::Brain,
            min_lesion_overlap: 1,
        }
    }
}

impl PipelineConfig {
    /// Load from an optional JSON file and apply `key=value` overrides
    /// (dotted paths, values parsed as JSON with bare-string fallback).
    /// File and override values merge recursively into the compiled-in
    /// defaults, so a config may set `windows.cbv` without restating the
    /// other windows.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value =
            serde_json::to_value(PipelineConfig::default()).expect("defaults serialize");
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let file_value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            deep_merge(&mut value, file_value);
        }
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        let config: PipelineConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.equalize_bins < 2 {
            return Err(Error::Config(format!(
                "equalize_bins must be >= 2, got {}",
                self.equalize_bins
            )));
        }
        if self.parallel_subjects < 1 {
            return Err(Error::Config("parallel_subjects must be >= 1".to_string()));
        }
        if self.min_lesion_overlap < 1 {
            return Err(Error::Config("min_lesion_overlap must be >= 1".to_string()));
        }
        for (modality, (lo, hi)) in &self.windows {
            if lo >= hi {
                return Err(Error::Config(format!(
                    "window for {modality} has lo {lo} >= hi {hi}"
                )));
            }
        }
        self.vessel_params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn window_for(&self, modality: Modality) -> Result<WindowSpec> {
        let (lo, hi) = self.windows.get(&modality).copied().ok_or_else(|| {
            Error::Config(format!("no window configured for modality {modality}"))
        })?;
        WindowSpec::new(modality, lo, hi)
    }

    /// SHA-256 over the canonical JSON serialization; lands in provenance
    /// records so outputs can be traced to an exact configuration.
    /// `parallel_subjects` is execution-only (outputs are identical for any
    /// pool size) and is normalized out of the hash.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.parallel_subjects = 1;
        let canonical = serde_json::to_string(&canonical).expect("config serializes");
        hex_digest(canonical.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn deep_merge(base: &mut serde_json::Value, incoming: serde_json::Value) {
    match (base, incoming) {
        (serde_json::Value::Object(base_map), serde_json::Value::Object(incoming_map)) => {
            for (key, value) in incoming_map {
                match base_map.get_mut(&key) {
                    Some(slot) => deep_merge(slot, value),
                    None => {
                        base_map.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

fn apply_override(value: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!("override '{spec}' is not of the form key=value"))
    })?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override path '{path}' crosses a non-object"))
        })?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), parsed);
            return Ok(());
        }
        cursor = map
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("override paths have at least one part");
}
