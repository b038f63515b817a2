//! Manifest-driven batch pipeline used by the CLI.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{BaselineForeground, Mode, PipelineConfig};
pub use manifest::{Manifest, SubjectManifest, SubjectPaths};
pub use run::{
    published_reference_ranges, run_evaluate, run_preprocess, run_qc, run_table1_check,
    run_vessels, BatchReport, EvalReport, MetricsSummary, QcOverlay, SubjectEval,
    SubjectOutcome, Table1Check, Table1Row,
};
