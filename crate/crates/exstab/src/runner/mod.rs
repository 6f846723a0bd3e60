//! Run orchestration: config schema, dataset ingestion, grid execution,
//! and report emission.
//!
//! A run is described by a TOML config (see [`RunConfig`]) and produces a
//! self-contained run directory:
//!
//! ```text
//! <output_dir>/
//!   config_echo.json   exact config the run used (minus output_dir)
//!   dataset.json       ingestion summary (counts, name)
//!   cases.jsonl        the full perturbation grid, one case per line
//!   records.jsonl      one evaluation record per (model, case), appended
//!   report.json        aggregated metrics, cost profiles, notes
//!   plotdata/*.csv     flat tables for plotting
//! ```
//!
//! Reports are a pure function of the run directory: `report` re-emits
//! byte-identical output without touching any model endpoint.

mod config;
pub mod dataset;
mod execute;
mod report;

pub use config::{
    DatasetConfig, DatasetFormat, ExplainerConfig, ModelConfig, ModelKind, PerturbationsConfig,
    RetryConfig, RunConfig, TranslationConfig, TranslationKind,
};
pub use dataset::{ingest_dataset, sample_documents, Dataset};
pub use execute::{execute_run, preview_grid, RunSummary};
pub use report::{
    emit_report, DatasetSummary, FailedCase, PerturbationStat, ReportNotes, RunReport, SkippedCase,
};
