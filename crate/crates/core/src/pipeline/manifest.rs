//! Subject manifests: the explicit JSON description of a dataset that
//! drives batch runs, plus a filename-convention scanner that drafts one.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Modality;

/// File paths for one subject. The six acquisition entries use the dataset
/// suffix conventions; `brain_mask` and `gt_lesion` are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ncct: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cta: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbf: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cbv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtt: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brain_mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_lesion: Option<PathBuf>,
}

impl SubjectPaths {
    pub fn get(&self, modality: Modality) -> Option<&PathBuf> {
        match modality {
            Modality::Ncct => self.ncct.as_ref(),
            Modality::Cta => self.cta.as_ref(),
            Modality::Cbf => self.cbf.as_ref(),
            Modality::Cbv => self.cbv.as_ref(),
            Modality::Mtt => self.mtt.as_ref(),
            Modality::Tmax => self.tmax.as_ref(),
            _ => None,
        }
    }

    fn set(&mut self, key: &str, path: PathBuf) {
        match key {
            "ncct" => self.ncct = Some(path),
            "cta" => self.cta = Some(path),
            "cbf" => self.cbf = Some(path),
            "cbv" => self.cbv = Some(path),
            "mtt" => self.mtt = Some(path),
            "tmax" => self.tmax = Some(path),
            "brain_mask" => self.brain_mask = Some(path),
            "gt_lesion" => self.gt_lesion = Some(path),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectManifest {
    pub subject_id: String,
    pub paths: SubjectPaths,
    pub outputs_dir: PathBuf,
}

impl SubjectManifest {
    /// Path for a required modality, or `MissingModality`.
    pub fn require(&self, modality: Modality) -> Result<&PathBuf> {
        self.paths.get(modality).ok_or_else(|| Error::MissingModality {
            subject: self.subject_id.clone(),
            modality: modality.to_string(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subjects: Vec<SubjectManifest>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for subject in &self.subjects {
            if subject.subject_id.is_empty() {
                return Err(Error::Config("empty subject_id".to_string()));
            }
            if !seen.insert(&subject.subject_id) {
                return Err(Error::Config(format!(
                    "duplicate subject_id '{}'",
                    subject.subject_id
                )));
            }
        }
        Ok(())
    }

    pub fn find(&self, subject_id: &str) -> Option<&SubjectManifest> {
        self.subjects.iter().find(|s| s.subject_id == subject_id)
    }

    /// Draft a manifest by scanning a directory tree for NIfTI files whose
    /// stems end in the suffix conventions `_ncct`, `_cta`, `_cbf`, `_cbv`,
    /// `_mtt`, `_tmax` (plus `_mask`/`_brain_mask` and `_lesion`/`_gt`).
    /// The result is a guess for human review, not a validated dataset.
    pub fn draft_from_dir(dir: impl AsRef<Path>, outputs_root: &Path) -> Result<Self> {
        let dir = dir.as_ref();
        let mut files = Vec::new();
        collect_nifti_files(dir, &mut files)?;
        files.sort();

        const SUFFIXES: [(&str, &str); 10] = [
            ("_ncct", "ncct"),
            ("_cta", "cta"),
            ("_cbf", "cbf"),
            ("_cbv", "cbv"),
            ("_mtt", "mtt"),
            ("_tmax", "tmax"),
            ("_brain_mask", "brain_mask"),
            ("_mask", "brain_mask"),
            ("_lesion", "gt_lesion"),
            ("_gt", "gt_lesion"),
        ];

        let mut by_subject: BTreeMap<String, SubjectPaths> = BTreeMap::new();
        for file in files {
            let stem = nifti_stem(&file);
            let lower = stem.to_ascii_lowercase();
            for (suffix, key) in SUFFIXES {
                if lower.ends_with(suffix) && lower.len() > suffix.len() {
                    let subject = stem[..stem.len() - suffix.len()].to_string();
                    let entry = by_subject.entry(subject).or_default();
                    entry.set(key, file.clone());
                    break;
                }
            }
        }

        let subjects = by_subject
            .into_iter()
            .map(|(subject_id, paths)| SubjectManifest {
                outputs_dir: outputs_root.join(&subject_id),
                subject_id,
                paths,
            })
            .collect();
        Ok(Manifest { subjects })
    }
}

fn collect_nifti_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_nifti_files(&path, out)?;
        } else {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("")
                .to_ascii_lowercase();
            if name.ends_with(".nii") || name.ends_with(".nii.gz") {
                out.push(path);
            }
        }
    }
    Ok(())
}

/// Filename without `.nii` / `.nii.gz`.
fn nifti_stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let lower = name.to_ascii_lowercase();
    if lower.ends_with(".nii.gz") {
        name[..name.len() - 7].to_string()
    } else if lower.ends_with(".nii") {
        name[..name.len() - 4].to_string()
    } else {
        name.to_string()
    }
}
