use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, DatasetConfig, GroupSpec};
use crate::error::{Error, Result};
use crate::imputers::{ImputerKind, ImputerOptions};
use crate::injector::{preset, Mechanism, MissingnessSpec, ScenarioId};
use crate::models::{HyperGrid, ModelKind};

pub const DEFAULT_SEEDS: [u64; 6] = [101, 102, 103, 104, 105, 106];

/// One dataset of a run: a schema config file, optionally with the CSV
/// location or the rule-table preset overridden.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub config: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    datasets: Vec<DatasetEntry>,
    #[serde(default = "default_scenarios")]
    scenarios: Vec<String>,
    #[serde(default = "default_rates")]
    train_rates: Vec<f64>,
    #[serde(default)]
    test_rates: Option<Vec<f64>>,
    imputers: Vec<String>,
    models: Vec<String>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default = "default_b")]
    bootstrap_members: usize,
    #[serde(default = "default_subsample")]
    subsample: f64,
    #[serde(default = "default_folds")]
    k_folds: usize,
    #[serde(default = "default_test_fraction")]
    test_fraction: f64,
    #[serde(default = "default_true")]
    baselines: bool,
    #[serde(default)]
    imputer_options: ImputerOptions,
    #[serde(default)]
    grids: BTreeMap<String, toml::Table>,
}

fn default_scenarios() -> Vec<String> {
    ScenarioId::ALL.iter().map(|s| s.to_string()).collect()
}
fn default_rates() -> Vec<f64> {
    vec![0.3]
}
fn default_b() -> usize {
    50
}
fn default_subsample() -> f64 {
    0.8
}
fn default_folds() -> usize {
    3
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_true() -> bool {
    true
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub datasets: Vec<DatasetEntry>,
    pub scenarios: Vec<ScenarioId>,
    pub train_rates: Vec<f64>,
    /// `None`: each pipeline is tested at its training rate.
    pub test_rates: Option<Vec<f64>>,
    pub imputers: Vec<ImputerKind>,
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub bootstrap_members: usize,
    pub subsample: f64,
    pub k_folds: usize,
    pub test_fraction: f64,
    pub baselines: bool,
    pub imputer_options: ImputerOptions,
    pub grids: BTreeMap<ModelKind, HyperGrid>,
    /// Directory relative dataset paths resolve against.
    pub base_dir: PathBuf,
}

fn parse_list<T>(field: &str, values: &[String], parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::Config(format!("`{field}`: list is empty")));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| parse(v).map_err(|e| Error::Config(format!("`{field}[{i}]`: {}", strip(e)))))
        .collect()
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn check_rates(field: &str, rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::Config(format!("`{field}`: list is empty")));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && **r <= 1.0)) {
        return Err(Error::Config(format!("`{field}`: rate {r} outside [0, 1]")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<RunConfig> {
        let raw: RawConfig = toml::from_str(text)?;
        if raw.datasets.is_empty() {
            return Err(Error::Config("`datasets`: list is empty".into()));
        }
        let scenarios = parse_list("scenarios", &raw.scenarios, |s| s.parse())?;
        let imputers = parse_list("imputers", &raw.imputers, |s| s.parse())?;
        let models = parse_list("models", &raw.models, |s| s.parse())?;
        check_rates("train_rates", &raw.train_rates)?;
        if let Some(t) = &raw.test_rates {
            check_rates("test_rates", t)?;
        }
        let seeds = raw.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(Error::Config("`seeds`: list is empty".into()));
        }
        if raw.bootstrap_members == 0 {
            return Err(Error::Config("`bootstrap_members` must be at least 1".into()));
        }
        if !(raw.subsample > 0.0 && raw.subsample <= 1.0) {
            return Err(Error::Config(format!("`subsample` must be in (0, 1], got {}", raw.subsample)));
        }
        if raw.k_folds < 2 {
            return Err(Error::Config(format!("`k_folds` must be at least 2, got {}", raw.k_folds)));
        }
        if !(raw.test_fraction > 0.0 && raw.test_fraction < 1.0) {
            return Err(Error::Config(format!("`test_fraction` must be in (0, 1), got {}", raw.test_fraction)));
        }
        for (i, d) in raw.datasets.iter().enumerate() {
            if let Some(p) = &d.preset {
                preset(p).map_err(|e| Error::Config(format!("`datasets[{i}].preset`: {}", strip(e))))?;
            }
        }
        let mut grids = BTreeMap::new();
        for (name, table) in raw.grids {
            let kind: ModelKind = name.parse().map_err(|e| Error::Config(format!("`grids.{name}`: {}", strip(e))))?;
            let mut table = table;
            table.insert("kind".into(), toml::Value::String(kind.as_str().into()));
            let grid: HyperGrid = table
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("`grids.{name}`: {}", e.message())))?;
            grid.validate()?;
            grids.insert(kind, grid);
        }
        Ok(RunConfig {
            datasets: raw.datasets,
            scenarios,
            train_rates: raw.train_rates,
            test_rates: raw.test_rates,
            imputers,
            models,
            seeds,
            bootstrap_members: raw.bootstrap_members,
            subsample: raw.subsample,
            k_folds: raw.k_folds,
            test_fraction: raw.test_fraction,
            baselines: raw.baselines,
            imputer_options: raw.imputer_options,
            grids,
            base_dir: base_dir.into(),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn grid(&self, kind: ModelKind) -> HyperGrid {
        self.grids.get(&kind).cloned().unwrap_or_else(|| HyperGrid::default_for(kind))
    }

    pub fn load_datasets(&self) -> Result<Vec<LoadedDataset>> {
        let loaded = self
            .datasets
            .iter()
            .map(|e| LoadedDataset::load(e, &self.base_dir))
            .collect::<Result<Vec<_>>>()?;
        let mut names: Vec<&str> = loaded.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("dataset name `{}` appears twice", w[0])));
        }
        Ok(loaded)
    }
}

/// A dataset ready for planning: data, rule tables and group definition.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub name: String,
    pub data: Dataset,
    /// Content digest of the loaded data, part of every GUID and cache key.
    pub digest: String,
    pub rules: BTreeMap<Mechanism, MissingnessSpec>,
    pub group: GroupSpec,
}

impl LoadedDataset {
    pub fn load(entry: &DatasetEntry, base_dir: &Path) -> Result<LoadedDataset> {
        let cfg = DatasetConfig::from_file(base_dir.join(&entry.config))?;
        let data = match &entry.csv {
            Some(csv) => cfg.load_from(base_dir.join(csv))?,
            None => cfg.load()?,
        };
        let rules = match (&entry.preset, &cfg.rules, &cfg.preset) {
            (Some(p), _, _) => preset(p)?.rules,
            (None, Some(path), _) => MissingnessSpec::from_file(path)?,
            (None, None, Some(p)) => preset(p)?.rules,
            (None, None, None) => {
                return Err(Error::Config(format!(
                    "dataset `{}` names neither a rule file nor a preset",
                    cfg.name
                )))
            }
        };
        Self::new(cfg.name, data, rules, cfg.group)
    }

    pub fn new(name: impl Into<String>, data: Dataset, rules: MissingnessSpec, group: GroupSpec) -> Result<LoadedDataset> {
        rules.validate()?;
        for r in &rules.rules {
            for c in r.missing_columns.iter().chain(&r.conditional_column) {
                data.column_index(c)?;
            }
        }
        group.validate()?;
        Ok(LoadedDataset {
            name: name.into(),
            digest: dataset_digest(&data)?,
            rules: rules.per_mechanism(),
            data,
            group,
        })
    }
}

pub fn dataset_digest(d: &Dataset) -> Result<String> {
    let bytes = serde_json::to_vec(d)?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..16]))
}
