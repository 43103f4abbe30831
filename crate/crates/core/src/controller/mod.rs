//! Run planning and execution.
//!
//! A run config expands into [`PipelineSpec`]s, each identified by a GUID
//! derived from its canonical JSON. Pipelines run on a worker pool, share
//! fitted imputers through an on-disk cache and append one
//! [`ResultRecord`] per pipeline to a JSONL store.

mod config;
mod pipeline;
mod plan;
mod report;
mod runner;
mod store;

pub use config::{dataset_digest, DatasetEntry, LoadedDataset, RunConfig, DEFAULT_SEEDS};
pub use pipeline::{
    run_pipeline, Artifacts, ImputationCache, Metrics, PipelineOutcome, ResultRecord, StageError, StageGuids, StageTimings, Status,
    TestReport, TuningSummary, CACHE_FORMAT_VERSION, METRIC_NAMES,
};
pub use plan::{digest, plan, PipelineSpec};
pub use report::{aggregate_report, correlate, observations, quantile, write_report, CorrelationTable, Observation, Summary, SummaryRow, GROUP_KEYS};
pub use runner::{manifest_path, run, run_specs, session_guid, sidecar_path, RunOptions, RunSummary, TimingLine};
pub use store::{Filter, Persisted, ResultStore};
