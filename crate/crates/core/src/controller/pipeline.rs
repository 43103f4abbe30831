use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::LoadedDataset;
use super::plan::PipelineSpec;
use crate::dataset::{group_membership, split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::imputers::{self, FittedImputer, ImputerKind};
use crate::injector::{inject_all, scenario_at_rates, Scenario};
use crate::metrics::{self, ImputationFairness, ImputationQuality};
use crate::models::{self, BootstrapEnsemble, HyperParams, Preprocessor, TrainedModel};
use crate::rng::{derive, label_seed};

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Metric names in the order reports and summaries list them.
pub const METRIC_NAMES: [&str; 14] = [
    "f1",
    "accuracy",
    "label_stability",
    "tprd",
    "tnrd",
    "srd",
    "di",
    "rmse_imp",
    "f1_imp",
    "kl_imp_cols",
    "kl_full",
    "rmse_diff",
    "f1_diff",
    "kl_diff",
];

/// Per-test-set metrics. `None` marks a metric that is undefined for this
/// test set (no injected numerical cells, an empty group, deletion, ...).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub label_stability: Option<f64>,
    pub tprd: Option<f64>,
    pub tnrd: Option<f64>,
    pub srd: Option<f64>,
    pub di: Option<f64>,
    pub rmse_imp: Option<f64>,
    pub f1_imp: Option<f64>,
    pub kl_imp_cols: Option<f64>,
    pub kl_full: Option<f64>,
    pub rmse_diff: Option<f64>,
    pub f1_diff: Option<f64>,
    pub kl_diff: Option<f64>,
}

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "f1" => self.f1,
            "accuracy" => self.accuracy,
            "label_stability" => self.label_stability,
            "tprd" => self.tprd,
            "tnrd" => self.tnrd,
            "srd" => self.srd,
            "di" => self.di,
            "rmse_imp" => self.rmse_imp,
            "f1_imp" => self.f1_imp,
            "kl_imp_cols" => self.kl_imp_cols,
            "kl_full" => self.kl_full,
            "rmse_diff" => self.rmse_diff,
            "f1_diff" => self.f1_diff,
            "kl_diff" => self.kl_diff,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_rate: f64,
    /// GUID of the training stage whose model produced these predictions.
    pub model_stage: String,
    pub test_rows: usize,
    pub injected_cells: usize,
    /// Fraction of test rows scored (below 1 only under deletion).
    pub retained_fraction: f64,
    pub metrics: Metrics,
    pub kl_full_columns: std::collections::BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageGuids {
    pub imputation: Option<String>,
    pub tuning: String,
    pub training: String,
    pub evaluation: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub chosen: HyperParams,
    pub mean_f1: f64,
    pub flagged_folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    /// Imputation cache entry, relative to the cache directory.
    pub imputer: Option<String>,
    /// Trained model, relative to the artifact directory.
    pub model: String,
}

/// One line of the result store.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub guid: String,
    pub spec: PipelineSpec,
    pub stages: StageGuids,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<StageError>,
    pub train_rows: Option<usize>,
    pub train_retained_fraction: Option<f64>,
    pub tuning: Option<TuningSummary>,
    pub ensemble_retries: usize,
    pub reports: Vec<TestReport>,
    pub artifacts: Artifacts,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub split: f64,
    pub injection: f64,
    pub imputation: f64,
    pub tuning: f64,
    pub training: f64,
    pub evaluation: f64,
}

/// Everything a pipeline run produces; only `record` goes to the store.
#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub record: ResultRecord,
    pub timings: StageTimings,
    /// `Some(true)` when the imputation stage was served from the cache.
    pub cache_hit: Option<bool>,
    pub model: Option<TrainedModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    format_version: u32,
    key: String,
    imputer: FittedImputer,
    train: Dataset,
    retained_fraction: f64,
}

/// On-disk store of fitted imputers and imputed training sets, keyed by
/// [`PipelineSpec::imputation_key`]. Entries are written to a temporary
/// file and renamed into place, so readers never see a partial entry.
#[derive(Clone, Debug)]
pub struct ImputationCache {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl ImputationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<ImputationCache> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ImputationCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_name(key: &str) -> String {
        format!("{key}.json")
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(Self::entry_name(key))
    }

    fn load(&self, key: &str) -> Option<CacheEntry> {
        let path = self.path(key);
        let text = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(e) if e.format_version == CACHE_FORMAT_VERSION && e.key == key => Some(e),
            Ok(_) => {
                log::warn!("ignoring stale cache entry {}", path.display());
                None
            }
            Err(err) => {
                log::warn!("ignoring unreadable cache entry {}: {err}", path.display());
                None
            }
        }
    }

    fn store(&self, entry: &CacheEntry) -> Result<()> {
        let path = self.path(&entry.key);
        let tmp = self.dir.join(format!(
            "{}.tmp-{}-{}",
            entry.key,
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, serde_json::to_vec(entry)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

/// Seeds of the pipeline's random streams. Each depends only on the inputs
/// of its stage, so stages shared between pipelines draw identically.
fn split_seed(spec: &PipelineSpec) -> u64 {
    derive(spec.seed, &[label_seed("split")])
}

fn injection_seed(spec: &PipelineSpec, side: &str, label: &str, rate: f64) -> u64 {
    derive(spec.seed, &[label_seed(&format!("inject/{side}/{label}/{rate}"))])
}

fn model_seed(spec: &PipelineSpec) -> u64 {
    let upstream = spec.imputation_key().unwrap_or_else(|| "baseline".into());
    let grid = serde_json::to_string(&spec.grid).expect("grids serialize");
    derive(spec.seed, &[label_seed(&upstream), label_seed(spec.model.as_str()), label_seed(&grid)])
}

struct Failure {
    stage: &'static str,
    error: Error,
}

trait At<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, Failure>;
}

impl<T> At<T> for Result<T> {
    fn at(self, stage: &'static str) -> std::result::Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

struct Imputed {
    imputer: Option<FittedImputer>,
    train: Dataset,
    retained_fraction: f64,
    cache_hit: Option<bool>,
}

/// Runs one pipeline end to end. Stage failures do not propagate: they are
/// recorded in the returned record together with the stage name.
pub fn run_pipeline(spec: &PipelineSpec, data: &LoadedDataset, cache: Option<&ImputationCache>) -> PipelineOutcome {
    let guid = spec.guid();
    let key = spec.imputation_key();
    let mut record = ResultRecord {
        guid: guid.clone(),
        spec: spec.clone(),
        stages: StageGuids {
            imputation: key.clone(),
            tuning: spec.stage_guid("tuning"),
            training: spec.stage_guid("training"),
            evaluation: spec.stage_guid("evaluation"),
        },
        status: Status::Ok,
        error: None,
        train_rows: None,
        train_retained_fraction: None,
        tuning: None,
        ensemble_retries: 0,
        reports: Vec::new(),
        artifacts: Artifacts {
            imputer: key.as_deref().map(ImputationCache::entry_name),
            model: format!("{guid}.model.json"),
        },
    };
    let mut timings = StageTimings::default();
    let mut cache_hit = None;
    let mut model = None;
    if let Err(f) = execute(spec, data, cache, &mut record, &mut timings, &mut cache_hit, &mut model) {
        record.status = Status::Error;
        record.error = Some(StageError {
            stage: f.stage.into(),
            message: f.error.to_string(),
        });
        record.reports.clear();
    }
    PipelineOutcome {
        record,
        timings,
        cache_hit,
        model,
    }
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *slot += t.elapsed().as_secs_f64();
    out
}

fn scenario(spec: &PipelineSpec, data: &LoadedDataset, test_rate: f64) -> Result<Option<Scenario>> {
    spec.scenario
        .map(|id| scenario_at_rates(id, &data.rules, spec.train_rate, test_rate))
        .transpose()
}

#[allow(clippy::too_many_arguments)]
fn execute(
    spec: &PipelineSpec,
    data: &LoadedDataset,
    cache: Option<&ImputationCache>,
    record: &mut ResultRecord,
    timings: &mut StageTimings,
    cache_hit: &mut Option<bool>,
    model_out: &mut Option<TrainedModel>,
) -> std::result::Result<(), Failure> {
    if spec.dataset != data.name || spec.dataset_digest != data.digest {
        return Err(Failure {
            stage: "split",
            error: Error::Contract(format!("pipeline targets dataset `{}` with a different digest", spec.dataset)),
        });
    }
    let (train_clean, test_clean) =
        timed(&mut timings.split, || split(&data.data, &SplitSpec::new(spec.test_fraction, split_seed(spec)))).at("split")?;

    let imputed = match (&spec.scenario, &spec.imputer) {
        (Some(id), Some(imputer_spec)) => {
            let key = record.stages.imputation.clone().expect("non-baseline pipelines have a key");
            match cache.and_then(|c| timed(&mut timings.imputation, || c.load(&key))) {
                Some(entry) => Imputed {
                    imputer: Some(entry.imputer),
                    train: entry.train,
                    retained_fraction: entry.retained_fraction,
                    cache_hit: Some(true),
                },
                None => {
                    let sc = scenario(spec, data, spec.train_rate).at("injection")?.expect("scenario present");
                    let seed = injection_seed(spec, "train", &id.train_label(), spec.train_rate);
                    let injected = timed(&mut timings.injection, || inject_all(&train_clean, &sc.train_specs, seed)).at("injection")?;
                    let (imputer, result) = timed(&mut timings.imputation, || -> Result<_> {
                        let fit_seed = derive(spec.seed, &[label_seed(&serde_json::to_string(imputer_spec)?)]);
                        let imputer = imputers::fit(&injected.dataset, imputer_spec, fit_seed)?;
                        let result = imputer.transform(&injected.dataset)?;
                        Ok((imputer, result))
                    })
                    .at("imputation")?;
                    let entry = CacheEntry {
                        format_version: CACHE_FORMAT_VERSION,
                        key,
                        imputer,
                        train: result.dataset,
                        retained_fraction: result.retained_fraction,
                    };
                    if let Some(c) = cache {
                        timed(&mut timings.imputation, || c.store(&entry)).at("imputation")?;
                    }
                    Imputed {
                        imputer: Some(entry.imputer),
                        train: entry.train,
                        retained_fraction: entry.retained_fraction,
                        cache_hit: cache.map(|_| false),
                    }
                }
            }
        }
        _ => {
            if train_clean.has_nulls() {
                return Err(Failure {
                    stage: "imputation",
                    error: Error::Contract("a clean baseline needs a dataset without nulls".into()),
                });
            }
            Imputed {
                imputer: None,
                train: train_clean.clone(),
                retained_fraction: 1.0,
                cache_hit: None,
            }
        }
    };
    *cache_hit = imputed.cache_hit;
    record.train_rows = Some(imputed.train.n_rows());
    record.train_retained_fraction = Some(imputed.retained_fraction);

    let seed = model_seed(spec);
    let train = &imputed.train;
    let (pre, x) = timed(&mut timings.tuning, || -> Result<_> {
        let pre = Preprocessor::fit(train)?;
        let x = pre.apply(train)?;
        Ok((pre, x))
    })
    .at("tuning")?;
    let y = train.labels();
    let report = timed(&mut timings.tuning, || models::tune(&x, y, &spec.grid, spec.k_folds, derive(seed, &[0]))).at("tuning")?;
    let best = report.table.iter().find(|g| g.params == report.chosen).expect("chosen point is in the table");
    record.tuning = Some(TuningSummary {
        chosen: report.chosen.clone(),
        mean_f1: best.mean_f1,
        flagged_folds: best.flagged_folds.len(),
    });
    let (model, ensemble) = timed(&mut timings.training, || -> Result<_> {
        let model = models::train_with(pre, &x, y, &report.chosen, derive(seed, &[1]))?;
        let ensemble = BootstrapEnsemble::fit(&x, y, &report.chosen, spec.bootstrap_members, spec.subsample, derive(seed, &[2]))?;
        Ok((model, ensemble))
    })
    .at("training")?;
    record.ensemble_retries = ensemble.retries.iter().sum();

    for &rate in &spec.test_rates {
        let (test_data, injected) = match spec.scenario {
            Some(id) => {
                let sc = scenario(spec, data, rate).at("injection")?.expect("scenario present");
                let s = injection_seed(spec, "test", &id.test_label(), rate);
                let inj = timed(&mut timings.injection, || inject_all(&test_clean, &sc.test_specs, s)).at("injection")?;
                (inj.dataset, Some(inj.injected))
            }
            None => (test_clean.clone(), None),
        };
        let report = timed(&mut timings.evaluation, || {
            evaluate(data, &test_clean, &test_data, injected.as_ref(), imputed.imputer.as_ref(), &model, &ensemble, rate, &record.stages.training)
        })
        .map_err(|(stage, error)| Failure { stage, error })?;
        record.reports.push(report);
    }
    *model_out = Some(model);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    data: &LoadedDataset,
    truth: &Dataset,
    injected_test: &Dataset,
    injected: Option<&crate::dataset::NullMask>,
    imputer: Option<&FittedImputer>,
    model: &TrainedModel,
    ensemble: &BootstrapEnsemble,
    rate: f64,
    model_stage: &str,
) -> std::result::Result<TestReport, (&'static str, Error)> {
    let imp = |e| ("imputation", e);
    let ev = |e| ("evaluation", e);
    let (completed, rows) = match imputer {
        Some(f) => {
            let r = f.transform(injected_test).map_err(imp)?;
            let rows = r.retained_rows.unwrap_or_else(|| (0..truth.n_rows()).collect());
            (r.dataset, rows)
        }
        None => (injected_test.clone(), (0..truth.n_rows()).collect()),
    };
    let deleted = imputer.is_some_and(|f| f.kind() == ImputerKind::Deletion);
    let kept_truth = truth.select_rows(&rows);
    let groups = group_membership(&kept_truth, &data.group).map_err(ev)?;

    let x = model.preprocessor.apply(&completed).map_err(ev)?;
    let pred = model.estimator.predict(&x);
    let y = kept_truth.labels();
    let scores = metrics::model_scores(y, &pred.labels).map_err(ev)?;
    let fair = metrics::fairness_scores(y, &pred.labels, &groups).map_err(ev)?;
    let stability = metrics::label_stability(&ensemble.predict(&x)).map_err(ev)?;

    let (quality, ifair) = match injected {
        Some(mask) if !deleted => {
            let all_groups = group_membership(truth, &data.group).map_err(ev)?;
            (
                metrics::imputation_quality(truth, &completed, mask).map_err(ev)?,
                metrics::imputation_fairness(truth, &completed, mask, &all_groups).map_err(ev)?,
            )
        }
        _ => (ImputationQuality::default(), ImputationFairness::default()),
    };
    Ok(TestReport {
        test_rate: rate,
        model_stage: model_stage.to_owned(),
        test_rows: truth.n_rows(),
        injected_cells: injected.map_or(0, |m| m.count()),
        retained_fraction: rows.len() as f64 / truth.n_rows() as f64,
        metrics: Metrics {
            f1: Some(scores.f1),
            accuracy: Some(scores.accuracy),
            label_stability: Some(stability.mean),
            tprd: fair.tprd,
            tnrd: fair.tnrd,
            srd: fair.srd,
            di: fair.di,
            rmse_imp: quality.rmse_imp,
            f1_imp: quality.f1_imp,
            kl_imp_cols: quality.kl_imp_cols,
            kl_full: quality.kl_full,
            rmse_diff: ifair.rmse_diff,
            f1_diff: ifair.f1_diff,
            kl_diff: ifair.kl_diff,
        },
        kl_full_columns: quality.kl_full_columns,
    })
}
