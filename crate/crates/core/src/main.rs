//! `ctprep` — manifest-driven batch CLI for CT stroke preprocessing,
//! vessel segmentation, evaluation, and QC rendering.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctprep::pipeline::{
    published_reference_ranges, run_evaluate, run_preprocess, run_qc, run_table1_check,
    run_vessels, BatchReport, Manifest, PipelineConfig, QcOverlay,
};
use ctprep::render::{Plane, RenderSpec, SliceIndex};
use ctprep::volume::Modality;
use ctprep::Error;

const EXIT_OK: u8 = 0;
const EXIT_PARTIAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ctprep",
    version,
    about = "CT stroke preprocessing: clinical windowing, vessel segmentation, metrics, QC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; compiled-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. --set vessel_params.s_min=30
    /// or --set mode=clinical+vessels. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, Error> {
        PipelineConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured preprocessing mode over every subject.
    Preprocess {
        /// Manifest JSON listing subjects and their file paths.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Derive a brain mask by thresholding + morphology when a subject
        /// has no mask file. Not clinically valid; off by default.
        #[arg(long)]
        allow_fallback_mask: bool,
        /// Write outputs under <OUT_ROOT>/<subject> instead of each
        /// subject's outputs_dir.
        #[arg(long)]
        out_root: Option<PathBuf>,
    },
    /// Write a binary vessel mask per subject from CTA - NCCT subtraction.
    Vessels {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        allow_fallback_mask: bool,
        #[arg(long)]
        out_root: Option<PathBuf>,
    },
    /// Score predictions against ground-truth lesion masks.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding <subject>.nii[.gz] (or <subject>_pred.nii[.gz])
        /// prediction masks.
        #[arg(long)]
        pred_dir: PathBuf,
        /// Output directory for per-subject reports and the aggregate.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render grayscale slices with optional mask overlays.
    Qc {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        subject: String,
        /// Modalities to render (repeatable); all five channels by default.
        #[arg(long = "modality")]
        modalities: Vec<String>,
        #[arg(long, default_value = "axial")]
        plane: String,
        /// Slice index, or "auto" for the slice with most overlay voxels.
        #[arg(long, default_value = "auto")]
        slice: String,
        /// "vessels" to compute the vessel mask on the fly, or a mask file.
        #[arg(long)]
        overlay: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        range_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        range_hi: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Write PNG instead of binary PPM.
        #[arg(long)]
        png: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        allow_fallback_mask: bool,
    },
    /// Reproduce the "% of range kept" comparison against reference
    /// foreground ranges.
    #[command(name = "table1-check")]
    Table1Check {
        /// JSON file mapping modality -> [lo, hi]; published ranges when
        /// omitted.
        #[arg(long)]
        ranges: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Draft a manifest from a directory tree by filename suffixes
    /// (_ncct, _cta, _cbf, _cbv, _mtt, _tmax, _mask, _lesion). Review the
    /// result by hand before using it.
    #[command(name = "manifest-draft")]
    ManifestDraft {
        /// Directory to scan recursively for .nii / .nii.gz files.
        #[arg(long)]
        dir: PathBuf,
        /// Where to write the draft manifest JSON.
        #[arg(long)]
        out: PathBuf,
        /// outputs_dir root recorded per subject.
        #[arg(long, default_value = "out")]
        outputs_root: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidWindow { .. } => {
                    EXIT_USAGE
                }
                _ => EXIT_PARTIAL,
            })
        }
    }
}

fn print_batch(report: &BatchReport) {
    for outcome in &report.outcomes {
        match &outcome.error {
            None => println!(
                "ok      {} ({} files)",
                outcome.subject_id,
                outcome.outputs.len()
            ),
            Some(e) => println!("FAILED  {}: {e}", outcome.subject_id),
        }
    }
    println!(
        "{} succeeded, {} failed",
        report.succeeded(),
        report.failed()
    );
}

fn batch_exit(report: &BatchReport) -> u8 {
    if report.failed() > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Preprocess {
            manifest,
            config,
            allow_fallback_mask,
            out_root,
        } => {
            let mut config = config.load()?;
            config.allow_fallback_mask |= allow_fallback_mask;
            let manifest = Manifest::load(&manifest)?;
            let report = run_preprocess(&manifest, &config, out_root.as_deref())?;
            print_batch(&report);
            Ok(batch_exit(&report))
        }
        Command::Vessels {
            manifest,
            config,
            allow_fallback_mask,
            out_root,
        } => {
            let mut config = config.load()?;
            config.allow_fallback_mask |= allow_fallback_mask;
            let manifest = Manifest::load(&manifest)?;
            let report = run_vessels(&manifest, &config, out_root.as_deref())?;
            print_batch(&report);
            Ok(batch_exit(&report))
        }
        Command::Evaluate {
            manifest,
            pred_dir,
            out,
            config,
        } => {
            let config = config.load()?;
            let manifest = Manifest::load(&manifest)?;
            let report = run_evaluate(&pred_dir, &manifest, &config, &out)?;
            if let (Some(mean), Some(sd)) = (&report.mean, &report.sd) {
                println!(
                    "dice {:.4} ({:.4})  avd_ml {:.4} ({:.4})  f1 {:.4} ({:.4})  alcd {:.4} ({:.4})",
                    mean.dice,
                    sd.dice,
                    mean.avd_ml,
                    sd.avd_ml,
                    mean.f1_lesionwise,
                    sd.f1_lesionwise,
                    mean.alcd,
                    sd.alcd
                );
            }
            println!("included: {}, excluded: {}", report.included, report.excluded);
            for id in &report.missing_predictions {
                println!("missing prediction: {id}");
            }
            for failure in &report.failed {
                println!(
                    "FAILED  {}: {}",
                    failure.subject_id,
                    failure.error.as_deref().unwrap_or("unknown")
                );
            }
            Ok(if report.excluded > 0 {
                EXIT_PARTIAL
            } else {
                EXIT_OK
            })
        }
        Command::Qc {
            manifest,
            subject,
            modalities,
            plane,
            slice,
            overlay,
            range_lo,
            range_hi,
            alpha,
            png,
            out,
            config,
            allow_fallback_mask,
        } => {
            let mut config = config.load()?;
            config.allow_fallback_mask |= allow_fallback_mask;
            let manifest = Manifest::load(&manifest)?;
            let modalities: Vec<Modality> = if modalities.is_empty() {
                Modality::CHANNELS.to_vec()
            } else {
                modalities
                    .iter()
                    .map(|m| m.parse())
                    .collect::<Result<_, _>>()?
            };
            let spec = RenderSpec {
                plane: plane.parse::<Plane>()?,
                slice_index: slice.parse::<SliceIndex>()?,
                overlay_alpha: alpha,
                value_range: (range_lo, range_hi),
                ..Default::default()
            };
            let overlay = match overlay.as_deref() {
                None => QcOverlay::None,
                Some("vessels") => QcOverlay::Vessels,
                Some(path) => QcOverlay::File(PathBuf::from(path)),
            };
            let written = run_qc(
                &manifest,
                &config,
                &subject,
                &modalities,
                &spec,
                &overlay,
                &out,
                png,
            )?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(EXIT_OK)
        }
        Command::Table1Check { ranges, config } => {
            let config = config.load()?;
            let ranges = match ranges {
                None => published_reference_ranges(),
                Some(path) => load_ranges(&path)?,
            };
            let check = run_table1_check(&config, &ranges)?;
            println!(
                "{:<6} {:>14} {:>20} {:>10} {:>10}  result",
                "chan", "window", "reference range", "kept %", "published"
            );
            for row in &check.rows {
                println!(
                    "{:<6} ({:>5}, {:>5}) ({:>9}, {:>8}) {:>10.1} {:>10.1}  {}",
                    row.modality.to_string(),
                    row.clinical.0,
                    row.clinical.1,
                    row.reference.0,
                    row.reference.1,
                    row.computed_percent,
                    row.published_percent,
                    if row.pass { "pass" } else { "FAIL" }
                );
            }
            Ok(if check.all_pass { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::ManifestDraft {
            dir,
            out,
            outputs_root,
        } => {
            let manifest = Manifest::draft_from_dir(&dir, &outputs_root)?;
            manifest.save(&out)?;
            println!(
                "drafted {} subjects into {} — review before use",
                manifest.subjects.len(),
                out.display()
            );
            Ok(EXIT_OK)
        }
    }
}

fn load_ranges(path: &Path) -> Result<BTreeMap<Modality, (f64, f64)>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
