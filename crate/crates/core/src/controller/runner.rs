use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{LoadedDataset, RunConfig};
use super::pipeline::{run_pipeline, ImputationCache, StageTimings, Status};
use super::plan::{digest, plan, PipelineSpec};
use super::store::{Persisted, ResultStore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub workers: usize,
    pub results: PathBuf,
    pub cache_dir: Option<PathBuf>,
    /// Directory for trained-model JSON; models are not kept when `None`.
    pub artifacts_dir: Option<PathBuf>,
    /// Skip pipelines whose GUID is already in the result store.
    pub resume: bool,
}

impl RunOptions {
    pub fn new(results: impl Into<PathBuf>) -> RunOptions {
        RunOptions {
            workers: 1,
            results: results.into(),
            cache_dir: None,
            artifacts_dir: None,
            resume: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub session: String,
    pub planned: usize,
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub duplicates: usize,
    pub cache_hits: usize,
    pub seconds: f64,
}

/// Timing sidecar line; kept out of the result store so stored records stay
/// reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingLine {
    pub guid: String,
    pub session: String,
    pub cache_hit: Option<bool>,
    pub timings: StageTimings,
}

pub fn sidecar_path(results: &Path) -> PathBuf {
    let mut s = results.as_os_str().to_owned();
    s.push(".timings.jsonl");
    PathBuf::from(s)
}

pub fn manifest_path(results: &Path) -> PathBuf {
    let mut s = results.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

/// Session GUID: digest of the ordered pipeline GUIDs of a plan.
pub fn session_guid(specs: &[PipelineSpec]) -> String {
    let joined: Vec<String> = specs.iter().map(PipelineSpec::guid).collect();
    digest(joined.join("\n").as_bytes())
}

/// Plans and executes a run config.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary> {
    let datasets = config.load_datasets()?;
    let specs = plan(config, &datasets)?;
    run_specs(&specs, &datasets, options)
}

/// Executes `specs` on a pool of `options.workers` threads. Records are
/// appended as pipelines finish; sort by GUID for a schedule-independent
/// view.
pub fn run_specs(specs: &[PipelineSpec], datasets: &[LoadedDataset], options: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    if options.workers == 0 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let by_name: HashMap<&str, &LoadedDataset> = datasets.iter().map(|d| (d.name.as_str(), d)).collect();
    let store = Mutex::new(ResultStore::open(&options.results)?);
    let session = session_guid(specs);
    let cache = options.cache_dir.as_ref().map(ImputationCache::new).transpose()?;
    if let Some(dir) = &options.artifacts_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let todo: Vec<&PipelineSpec> = {
        let s = store.lock().expect("store lock");
        specs.iter().filter(|p| !(options.resume && s.contains(&p.guid()))).collect()
    };
    let skipped = specs.len() - todo.len();
    let sidecar = Mutex::new(
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(sidecar_path(&options.results))
            .map_err(|e| Error::io(sidecar_path(&options.results), e))?,
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let outcomes: Vec<(bool, Persisted, Option<bool>)> = pool.install(|| {
        todo.par_iter()
            .map(|spec| -> Result<(bool, Persisted, Option<bool>)> {
                let data = by_name
                    .get(spec.dataset.as_str())
                    .ok_or_else(|| Error::Config(format!("pipeline names unknown dataset `{}`", spec.dataset)))?;
                let out = run_pipeline(spec, data, cache.as_ref());
                log::info!("{} {}", spec.label(), if out.record.status == Status::Ok { "ok" } else { "failed" });
                if let (Some(dir), Some(model)) = (&options.artifacts_dir, &out.model) {
                    let path = dir.join(&out.record.artifacts.model);
                    std::fs::write(&path, model.to_json()?).map_err(|e| Error::io(&path, e))?;
                }
                let persisted = store.lock().expect("store lock").persist(&out.record)?;
                let line = serde_json::to_string(&TimingLine {
                    guid: out.record.guid.clone(),
                    session: session.clone(),
                    cache_hit: out.cache_hit,
                    timings: out.timings,
                })?;
                writeln!(sidecar.lock().expect("sidecar lock"), "{line}").map_err(|e| Error::io(sidecar_path(&options.results), e))?;
                Ok((out.record.status == Status::Error, persisted, out.cache_hit))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let summary = RunSummary {
        session,
        planned: specs.len(),
        executed: outcomes.len(),
        skipped,
        failed: outcomes.iter().filter(|o| o.0).count(),
        duplicates: outcomes.iter().filter(|o| o.1 == Persisted::Duplicate).count(),
        cache_hits: outcomes.iter().filter(|o| o.2 == Some(true)).count(),
        seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&summary, specs, options)?;
    Ok(summary)
}

fn write_manifest(summary: &RunSummary, specs: &[PipelineSpec], options: &RunOptions) -> Result<()> {
    let mut m = String::new();
    let _ = writeln!(m, "session    {}", summary.session);
    let _ = writeln!(m, "results    {}", options.results.display());
    let _ = writeln!(m, "timings    {}", sidecar_path(&options.results).display());
    if let Some(c) = &options.cache_dir {
        let _ = writeln!(m, "cache      {}", c.display());
    }
    if let Some(a) = &options.artifacts_dir {
        let _ = writeln!(m, "artifacts  {}", a.display());
    }
    let _ = writeln!(m, "workers    {}", options.workers);
    let _ = writeln!(
        m,
        "pipelines  {} planned, {} executed, {} skipped, {} failed, {} cache hits",
        summary.planned, summary.executed, summary.skipped, summary.failed, summary.cache_hits
    );
    let _ = writeln!(m, "seconds    {:.1}", summary.seconds);
    let _ = writeln!(m);
    for s in specs {
        let _ = writeln!(m, "{}  {}", s.guid(), s.label());
    }
    let path = manifest_path(&options.results);
    std::fs::write(&path, m).map_err(|e| Error::io(&path, e))
}
