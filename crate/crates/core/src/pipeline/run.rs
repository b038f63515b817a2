//! Batch orchestration: manifest-driven preprocessing, vessel extraction,
//! evaluation, QC rendering, and the published-range check.
//!
//! Subjects are processed by a bounded worker pool; per-subject failures
//! are recorded and never abort the batch. All reductions happen in
//! subject-id order so outputs are bit-identical regardless of the pool
//! size.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport};
use crate::nifti::{read_volume_as, write_volume, Datatype};
use crate::ops::nonzero_mask;
use crate::pipeline::config::{hex_digest, BaselineForeground, Mode, PipelineConfig};
use crate::pipeline::manifest::{Manifest, SubjectManifest};
use crate::preprocess::{
    baseline_normalize, clinical_window, equalize_foreground, fallback_skull_strip,
    range_kept_percent, stats_from_pooled, ForegroundStats, PUBLISHED_RANGE_KEPT,
};
use crate::render::{qc_filename, render_slice, RenderSpec};
use crate::vessel::{segment_vessels, vessel_channel};
use crate::volume::{BinaryMask3D, Modality, Volume3D};

/// Result of one subject within a batch.
#[derive(Debug, Clone, Serialize)]
pub struct SubjectOutcome {
    pub subject_id: String,
    /// Files written, relative to the subject's outputs directory.
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub outcomes: Vec<SubjectOutcome>,
}

impl BatchReport {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    pub fn succeeded(&self) -> usize {
        self.outcomes.len() - self.failed()
    }
}

#[derive(Debug, Clone, Serialize)]
struct ChannelRecord {
    file: String,
    modality: String,
    datatype: String,
    min: f64,
    max: f64,
    nonzero_voxels: usize,
    total_voxels: usize,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    subject_id: String,
    mode: String,
    config_sha256: String,
    brain_mask_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_stats: Option<BTreeMap<String, ForegroundStats>>,
    channels: Vec<ChannelRecord>,
}

fn resolve_outputs_dir(subject: &SubjectManifest, out_root: Option<&Path>) -> PathBuf {
    match out_root {
        Some(root) => root.join(&subject.subject_id),
        None => subject.outputs_dir.clone(),
    }
}

fn load_brain_mask(
    subject: &SubjectManifest,
    config: &PipelineConfig,
) -> Result<(BinaryMask3D, String)> {
    if let Some(path) = &subject.paths.brain_mask {
        let vol = read_volume_as(path, Modality::Mask)?;
        Ok((nonzero_mask(&vol), format!("file:{}", path.display())))
    } else if config.allow_fallback_mask {
        let ncct = read_volume_as(subject.require(Modality::Ncct)?, Modality::Ncct)?;
        Ok((
            fallback_skull_strip(&ncct)?,
            "fallback-threshold-morphology".to_string(),
        ))
    } else {
        Err(Error::MissingModality {
            subject: subject.subject_id.clone(),
            modality: "brain_mask (provide a mask file or enable the fallback)".to_string(),
        })
    }
}

fn write_channel(
    vol: &Volume3D,
    dir: &Path,
    file: &str,
    datatype: Datatype,
) -> Result<ChannelRecord> {
    let path = dir.join(file);
    write_volume(vol, &path, datatype)?;
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (min, max) = vol.finite_range().unwrap_or((0.0, 0.0));
    Ok(ChannelRecord {
        file: file.to_string(),
        modality: vol.modality.to_string(),
        datatype: datatype.to_string(),
        min,
        max,
        nonzero_voxels: vol.voxels.iter().filter(|v| **v != 0.0).count(),
        total_voxels: vol.voxels.len(),
        sha256: hex_digest(&bytes),
    })
}

fn write_provenance(dir: &Path, provenance: &Provenance) -> Result<String> {
    let file = format!("{}_provenance.json", provenance.subject_id);
    let path = dir.join(&file);
    let text = serde_json::to_string_pretty(provenance).expect("provenance serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(file)
}

fn run_pool<T, F>(parallel: usize, subjects: &[SubjectManifest], work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SubjectManifest) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| subjects.par_iter().map(&work).collect()))
}

fn sorted_subjects(manifest: &Manifest) -> Vec<SubjectManifest> {
    let mut subjects = manifest.subjects.clone();
    subjects.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    subjects
}

/// Run the configured preprocessing mode over every subject. Per-subject
/// errors are recorded in the report; the batch always completes.
pub fn run_preprocess(
    manifest: &Manifest,
    config: &PipelineConfig,
    out_root: Option<&Path>,
) -> Result<BatchReport> {
    manifest.validate()?;
    config.validate()?;
    let subjects = sorted_subjects(manifest);
    match config.mode {
        Mode::Clinical | Mode::ClinicalVessels => {
            let outcomes = run_pool(config.parallel_subjects, &subjects, |subject| {
                match preprocess_clinical_subject(subject, config, out_root) {
                    Ok(outputs) => SubjectOutcome {
                        subject_id: subject.subject_id.clone(),
                        outputs,
                        error: None,
                    },
                    Err(e) => SubjectOutcome {
                        subject_id: subject.subject_id.clone(),
                        outputs: Vec::new(),
                        error: Some(e.to_string()),
                    },
                }
            })?;
            Ok(BatchReport { outcomes })
        }
        Mode::Baseline => run_baseline(&subjects, config, out_root),
    }
}

fn preprocess_clinical_subject(
    subject: &SubjectManifest,
    config: &PipelineConfig,
    out_root: Option<&Path>,
) -> Result<Vec<String>> {
    let dir = resolve_outputs_dir(subject, out_root);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (brain, brain_source) = load_brain_mask(subject, config)?;

    let mut channels = Vec::new();
    for modality in Modality::CHANNELS {
        if config.mode == Mode::ClinicalVessels && modality == Modality::Cta {
            // The CTA channel is replaced by the binary vessel map.
            let cta = read_volume_as(subject.require(Modality::Cta)?, Modality::Cta)?;
            let ncct = read_volume_as(subject.require(Modality::Ncct)?, Modality::Ncct)?;
            let vessels = segment_vessels(&cta, &ncct, &brain, &config.vessel_params)?;
            let channel = vessel_channel(&vessels);
            let file = format!("{}_vessels_preproc.nii.gz", subject.subject_id);
            channels.push(write_channel(&channel, &dir, &file, Datatype::Uint8)?);
        } else {
            let vol = read_volume_as(subject.require(modality)?, modality)?;
            let windowed = clinical_window(&vol, &config.window_for(modality)?, &brain)?;
            let equalized = equalize_foreground(&windowed, &brain, config.equalize_bins)?;
            let file = format!("{}_{}_preproc.nii.gz", subject.subject_id, modality);
            channels.push(write_channel(&equalized, &dir, &file, Datatype::Float32)?);
        }
    }

    let mut outputs: Vec<String> = channels.iter().map(|c| c.file.clone()).collect();
    let provenance = Provenance {
        subject_id: subject.subject_id.clone(),
        mode: config.mode.to_string(),
        config_sha256: config.content_hash(),
        brain_mask_source: brain_source,
        baseline_stats: None,
        channels,
    };
    outputs.push(write_provenance(&dir, &provenance)?);
    Ok(outputs)
}

/// Baseline mode: pool foreground intensities per channel across the whole
/// dataset (pass 1), then z-score every subject with those stats (pass 2).
fn run_baseline(
    subjects: &[SubjectManifest],
    config: &PipelineConfig,
    out_root: Option<&Path>,
) -> Result<BatchReport> {
    let mut pooled: BTreeMap<Modality, Vec<f64>> = Modality::CHANNELS
        .iter()
        .map(|m| (*m, Vec::new()))
        .collect();
    let mut outcomes: Vec<SubjectOutcome> = Vec::new();
    let mut survivors: Vec<&SubjectManifest> = Vec::new();

    for subject in subjects {
        match pool_subject_foreground(subject, config, &mut pooled) {
            Ok(()) => survivors.push(subject),
            Err(e) => outcomes.push(SubjectOutcome {
                subject_id: subject.subject_id.clone(),
                outputs: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }

    let mut stats: BTreeMap<Modality, ForegroundStats> = BTreeMap::new();
    for (modality, values) in pooled {
        stats.insert(modality, stats_from_pooled(values)?);
    }

    let survivors_owned: Vec<SubjectManifest> = survivors.into_iter().cloned().collect();
    let processed = run_pool(config.parallel_subjects, &survivors_owned, |subject| {
        match baseline_subject(subject, config, &stats, out_root) {
            Ok(outputs) => SubjectOutcome {
                subject_id: subject.subject_id.clone(),
                outputs,
                error: None,
            },
            Err(e) => SubjectOutcome {
                subject_id: subject.subject_id.clone(),
                outputs: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    })?;
    outcomes.extend(processed);
    outcomes.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(BatchReport { outcomes })
}

fn baseline_foreground_mask(
    subject: &SubjectManifest,
    config: &PipelineConfig,
) -> Result<BinaryMask3D> {
    match config.baseline_foreground {
        BaselineForeground::Brain => Ok(load_brain_mask(subject, config)?.0),
        BaselineForeground::Label => {
            let path = subject.paths.gt_lesion.as_ref().ok_or_else(|| {
                Error::MissingModality {
                    subject: subject.subject_id.clone(),
                    modality: "gt_lesion (required by baseline_foreground=label)".to_string(),
                }
            })?;
            Ok(nonzero_mask(&read_volume_as(path, Modality::Mask)?))
        }
    }
}

fn pool_subject_foreground(
    subject: &SubjectManifest,
    config: &PipelineConfig,
    pooled: &mut BTreeMap<Modality, Vec<f64>>,
) -> Result<()> {
    let foreground = baseline_foreground_mask(subject, config)?;
    for modality in Modality::CHANNELS {
        let vol = read_volume_as(subject.require(modality)?, modality)?;
        if !vol.geometry().compatible(&foreground.geometry) {
            return Err(Error::GeometryMismatch(
                vol.geometry().mismatch_message(&foreground.geometry),
            ));
        }
        let sink = pooled.get_mut(&modality).expect("all channels pre-seeded");
        for (&v, &inside) in vol.voxels.iter().zip(foreground.bits.iter()) {
            if inside && v.is_finite() {
                sink.push(v);
            }
        }
    }
    Ok(())
}

fn baseline_subject(
    subject: &SubjectManifest,
    config: &PipelineConfig,
    stats: &BTreeMap<Modality, ForegroundStats>,
    out_root: Option<&Path>,
) -> Result<Vec<String>> {
    let dir = resolve_outputs_dir(subject, out_root);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut channels = Vec::new();
    for modality in Modality::CHANNELS {
        let vol = read_volume_as(subject.require(modality)?, modality)?;
        let normalized = baseline_normalize(&vol, &stats[&modality])?;
        let file = format!("{}_{}_preproc.nii.gz", subject.subject_id, modality);
        channels.push(write_channel(&normalized, &dir, &file, Datatype::Float32)?);
    }

    let mut outputs: Vec<String> = channels.iter().map(|c| c.file.clone()).collect();
    let provenance = Provenance {
        subject_id: subject.subject_id.clone(),
        mode: config.mode.to_string(),
        config_sha256: config.content_hash(),
        brain_mask_source: match config.baseline_foreground {
            BaselineForeground::Brain => "baseline-foreground:brain".to_string(),
            BaselineForeground::Label => "baseline-foreground:label".to_string(),
        },
        baseline_stats: Some(
            stats
                .iter()
                .map(|(m, s)| (m.to_string(), *s))
                .collect(),
        ),
        channels,
    };
    outputs.push(write_provenance(&dir, &provenance)?);
    Ok(outputs)
}

/// Segment vessels for every subject, writing `<id>_vessels.nii.gz`.
pub fn run_vessels(
    manifest: &Manifest,
    config: &PipelineConfig,
    out_root: Option<&Path>,
) -> Result<BatchReport> {
    manifest.validate()?;
    config.validate()?;
    let subjects = sorted_subjects(manifest);
    let outcomes = run_pool(config.parallel_subjects, &subjects, |subject| {
        let run = || -> Result<Vec<String>> {
            let dir = resolve_outputs_dir(subject, out_root);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let (brain, brain_source) = load_brain_mask(subject, config)?;
            let cta = read_volume_as(subject.require(Modality::Cta)?, Modality::Cta)?;
            let ncct = read_volume_as(subject.require(Modality::Ncct)?, Modality::Ncct)?;
            let vessels = segment_vessels(&cta, &ncct, &brain, &config.vessel_params)?;
            let channel = vessel_channel(&vessels);
            let file = format!("{}_vessels.nii.gz", subject.subject_id);
            let record = write_channel(&channel, &dir, &file, Datatype::Uint8)?;
            let provenance = Provenance {
                subject_id: subject.subject_id.clone(),
                mode: "vessels".to_string(),
                config_sha256: config.content_hash(),
                brain_mask_source: brain_source,
                baseline_stats: None,
                channels: vec![record],
            };
            let prov_file = write_provenance(&dir, &provenance)?;
            Ok(vec![file, prov_file])
        };
        match run() {
            Ok(outputs) => SubjectOutcome {
                subject_id: subject.subject_id.clone(),
                outputs,
                error: None,
            },
            Err(e) => SubjectOutcome {
                subject_id: subject.subject_id.clone(),
                outputs: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    })?;
    Ok(BatchReport { outcomes })
}

/// Per-metric mean or standard deviation across subjects.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricsSummary {
    pub dice: f64,
    pub avd_ml: f64,
    pub f1_lesionwise: f64,
    pub alcd: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubjectEval {
    pub subject_id: String,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub included: usize,
    pub excluded: usize,
    pub missing_predictions: Vec<String>,
    pub failed: Vec<SubjectOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<MetricsSummary>,
    /// Population standard deviation (divide by N).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<MetricsSummary>,
    pub per_subject: Vec<SubjectEval>,
}

fn find_prediction(pred_dir: &Path, subject_id: &str) -> Option<PathBuf> {
    for candidate in [
        format!("{subject_id}.nii.gz"),
        format!("{subject_id}.nii"),
        format!("{subject_id}_pred.nii.gz"),
        format!("{subject_id}_pred.nii"),
    ] {
        let path = pred_dir.join(candidate);
        if path.is_file() {
            return Some(path);
        }
    }
    None
}

fn summarize(values: &[MetricsReport]) -> (MetricsSummary, MetricsSummary) {
    let n = values.len() as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| values.iter().map(f).sum::<f64>() / n;
    let dice_m = mean(&|r| r.dice);
    let avd_m = mean(&|r| r.avd_ml);
    let f1_m = mean(&|r| r.f1_lesionwise);
    let alcd_m = mean(&|r| r.alcd as f64);
    let sd = |f: &dyn Fn(&MetricsReport) -> f64, m: f64| {
        (values.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / n).sqrt()
    };
    (
        MetricsSummary {
            dice: dice_m,
            avd_ml: avd_m,
            f1_lesionwise: f1_m,
            alcd: alcd_m,
        },
        MetricsSummary {
            dice: sd(&|r| r.dice, dice_m),
            avd_ml: sd(&|r| r.avd_ml, avd_m),
            f1_lesionwise: sd(&|r| r.f1_lesionwise, f1_m),
            alcd: sd(&|r| r.alcd as f64, alcd_m),
        },
    )
}

/// Evaluate predictions in `pred_dir` against the manifest's ground-truth
/// lesions: one JSON report per subject plus an aggregate CSV and JSON
/// (mean and population SD per metric). Missing predictions are excluded
/// from the aggregate and counted.
pub fn run_evaluate(
    pred_dir: &Path,
    manifest: &Manifest,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<EvalReport> {
    manifest.validate()?;
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let subjects = sorted_subjects(manifest);

    enum Outcome {
        Ok(SubjectEval),
        Missing(String),
        Failed(SubjectOutcome),
    }

    let results = run_pool(config.parallel_subjects, &subjects, |subject| {
        let id = subject.subject_id.clone();
        let Some(pred_path) = find_prediction(pred_dir, &id) else {
            return Outcome::Missing(id);
        };
        let run = || -> Result<MetricsReport> {
            let gt_path = subject.paths.gt_lesion.as_ref().ok_or_else(|| {
                Error::MissingModality {
                    subject: id.clone(),
                    modality: "gt_lesion".to_string(),
                }
            })?;
            let pred = nonzero_mask(&read_volume_as(&pred_path, Modality::Mask)?);
            let gt = nonzero_mask(&read_volume_as(gt_path, Modality::Mask)?);
            evaluate(&pred, &gt, config.connectivity, config.min_lesion_overlap)
        };
        match run() {
            Ok(report) => Outcome::Ok(SubjectEval {
                subject_id: id,
                report,
            }),
            Err(e) => Outcome::Failed(SubjectOutcome {
                subject_id: id,
                outputs: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    })?;

    let mut per_subject = Vec::new();
    let mut missing = Vec::new();
    let mut failed = Vec::new();
    for outcome in results {
        match outcome {
            Outcome::Ok(eval) => per_subject.push(eval),
            Outcome::Missing(id) => missing.push(id),
            Outcome::Failed(o) => failed.push(o),
        }
    }

    for eval in &per_subject {
        let path = out_dir.join(format!("{}_metrics.json", eval.subject_id));
        let text = serde_json::to_string_pretty(eval).expect("report serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    let reports: Vec<MetricsReport> = per_subject.iter().map(|e| e.report).collect();
    let (mean, sd) = if reports.is_empty() {
        (None, None)
    } else {
        let (m, s) = summarize(&reports);
        (Some(m), Some(s))
    };

    let report = EvalReport {
        included: per_subject.len(),
        excluded: missing.len() + failed.len(),
        missing_predictions: missing,
        failed,
        mean,
        sd,
        per_subject,
    };

    let csv_path = out_dir.join("aggregate.csv");
    let mut csv = String::from("metric,mean,sd,n\n");
    if let (Some(mean), Some(sd)) = (&report.mean, &report.sd) {
        let n = report.included;
        csv.push_str(&format!("dice,{},{},{n}\n", mean.dice, sd.dice));
        csv.push_str(&format!("avd_ml,{},{},{n}\n", mean.avd_ml, sd.avd_ml));
        csv.push_str(&format!(
            "f1_lesionwise,{},{},{n}\n",
            mean.f1_lesionwise, sd.f1_lesionwise
        ));
        csv.push_str(&format!("alcd,{},{},{n}\n", mean.alcd, sd.alcd));
    }
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    let json_path = out_dir.join("aggregate.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub modality: Modality,
    pub clinical: (f64, f64),
    pub reference: (f64, f64),
    pub computed_percent: f64,
    pub published_percent: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Check {
    pub rows: Vec<Table1Row>,
    pub all_pass: bool,
}

/// Compare the configured clinical windows against reference foreground
/// ranges, reproducing the published "% of range kept" column. A row
/// passes when the computed percentage matches the published one within
/// 0.1 at one-decimal rounding.
pub fn run_table1_check(
    config: &PipelineConfig,
    reference_ranges: &BTreeMap<Modality, (f64, f64)>,
) -> Result<Table1Check> {
    let mut rows = Vec::new();
    for (modality, published) in PUBLISHED_RANGE_KEPT {
        let clinical = config.window_for(modality)?;
        let reference = reference_ranges.get(&modality).copied().ok_or_else(|| {
            Error::MissingModality {
                subject: "table1-check".to_string(),
                modality: modality.to_string(),
            }
        })?;
        let computed = range_kept_percent(&clinical, reference)?;
        // Compare in integer tenths to keep the +-0.1 gate exact.
        let pass =
            ((computed * 10.0).round() as i64 - (published * 10.0).round() as i64).abs() <= 1;
        rows.push(Table1Row {
            modality,
            clinical: (clinical.lo, clinical.hi),
            reference,
            computed_percent: computed,
            published_percent: published,
            pass,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(Table1Check { rows, all_pass })
}

/// Overlay source for QC rendering.
#[derive(Debug, Clone)]
pub enum QcOverlay {
    None,
    /// Segment vessels on the fly from the subject's CTA/NCCT/brain mask.
    Vessels,
    /// Any mask volume on disk (nonzero voxels are the overlay).
    File(PathBuf),
}

/// Render QC slices for one subject. Returns the written image paths,
/// named `<subject>_<modality>_<plane><index>[_overlay].<ext>`.
pub fn run_qc(
    manifest: &Manifest,
    config: &PipelineConfig,
    subject_id: &str,
    modalities: &[Modality],
    spec: &RenderSpec,
    overlay: &QcOverlay,
    out_dir: &Path,
    png: bool,
) -> Result<Vec<PathBuf>> {
    let subject = manifest
        .find(subject_id)
        .ok_or_else(|| Error::Config(format!("subject '{subject_id}' not in manifest")))?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let overlay_mask: Option<BinaryMask3D> = match overlay {
        QcOverlay::None => None,
        QcOverlay::File(path) => Some(nonzero_mask(&read_volume_as(path, Modality::Mask)?)),
        QcOverlay::Vessels => {
            let (brain, _) = load_brain_mask(subject, config)?;
            let cta = read_volume_as(subject.require(Modality::Cta)?, Modality::Cta)?;
            let ncct = read_volume_as(subject.require(Modality::Ncct)?, Modality::Ncct)?;
            Some(segment_vessels(&cta, &ncct, &brain, &config.vessel_params)?)
        }
    };

    let ext = if png { "png" } else { "ppm" };
    let mut written = Vec::new();
    for modality in modalities {
        let vol = read_volume_as(subject.require(*modality)?, *modality)?;
        let image = render_slice(&vol, overlay_mask.as_ref(), spec)?;
        let name = qc_filename(
            subject_id,
            modality.as_str(),
            spec.plane,
            image.slice_index,
            overlay_mask.is_some(),
            ext,
        );
        let path = out_dir.join(name);
        image.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Built-in reference ranges (the published per-channel foreground
/// percentile ranges), keyed by modality.
pub fn published_reference_ranges() -> BTreeMap<Modality, (f64, f64)> {
    crate::preprocess::BASELINE_FOREGROUND_RANGES
        .iter()
        .map(|(m, lo, hi)| (*m, (*lo, *hi)))
        .collect()
}

/// Connectivity values reported alongside the pinned default in
/// sensitivity output.
pub const SENSITIVITY_CONNECTIVITIES: [Connectivity; 3] = [
    Connectivity::Six,
    Connectivity::Eighteen,
    Connectivity::TwentySix,
];
