use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{LoadedDataset, RunConfig};
use crate::error::Result;
use crate::imputers::ImputerSpec;
use crate::injector::ScenarioId;
use crate::models::{HyperGrid, ModelKind};

/// Everything that determines a pipeline's outcome. The GUID is a digest of
/// this struct's canonical JSON, so two identical specs always share a GUID.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub dataset: String,
    pub dataset_digest: String,
    /// `None` for a clean baseline: no injection, no imputation.
    pub scenario: Option<ScenarioId>,
    pub train_rate: f64,
    pub test_rates: Vec<f64>,
    pub imputer: Option<ImputerSpec>,
    pub model: ModelKind,
    pub grid: HyperGrid,
    pub seed: u64,
    pub bootstrap_members: usize,
    pub subsample: f64,
    pub k_folds: usize,
    pub test_fraction: f64,
}

/// Hex of the first 16 bytes of SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..16])
}

impl PipelineSpec {
    pub fn is_baseline(&self) -> bool {
        self.scenario.is_none()
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("pipeline specs always serialize")
    }

    pub fn guid(&self) -> String {
        digest(self.canonical_json().as_bytes())
    }

    /// GUID of a stage nested under this pipeline.
    pub fn stage_guid(&self, stage: &str) -> String {
        digest(format!("{}/{stage}", self.guid()).as_bytes())
    }

    /// Key of the imputation stage. It covers only what the fitted imputer
    /// and the imputed training set depend on, so pipelines that differ in
    /// model or test side share it.
    pub fn imputation_key(&self) -> Option<String> {
        let scenario = self.scenario?;
        let imputer = self.imputer.as_ref()?;
        let key = serde_json::json!({
            "dataset": self.dataset,
            "dataset_digest": self.dataset_digest,
            "train": scenario.train_label(),
            "train_rate": self.train_rate,
            "imputer": imputer,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
        });
        Some(digest(key.to_string().as_bytes()))
    }

    pub fn label(&self) -> String {
        match (self.scenario, &self.imputer) {
            (Some(s), Some(i)) => format!(
                "{}/{s}@{}/{}/{}/seed{}",
                self.dataset,
                self.train_rate,
                i.kind().as_str(),
                self.model.as_str(),
                self.seed
            ),
            _ => format!("{}/baseline/{}/seed{}", self.dataset, self.model.as_str(), self.seed),
        }
    }
}

/// Expands a run config into pipeline specs: the full Cartesian product in
/// config order (dataset, scenario, train rate, imputer, model, seed),
/// followed by one clean baseline per (dataset, model, seed) when enabled.
pub fn plan(config: &RunConfig, datasets: &[LoadedDataset]) -> Result<Vec<PipelineSpec>> {
    let mut out = Vec::new();
    let base = |d: &LoadedDataset, model: ModelKind, seed: u64| PipelineSpec {
        dataset: d.name.clone(),
        dataset_digest: d.digest.clone(),
        scenario: None,
        train_rate: 0.0,
        test_rates: vec![0.0],
        imputer: None,
        model,
        grid: config.grid(model),
        seed,
        bootstrap_members: config.bootstrap_members,
        subsample: config.subsample,
        k_folds: config.k_folds,
        test_fraction: config.test_fraction,
    };
    for d in datasets {
        for &scenario in &config.scenarios {
            for &rate in &config.train_rates {
                for &imputer in &config.imputers {
                    for &model in &config.models {
                        for &seed in &config.seeds {
                            out.push(PipelineSpec {
                                scenario: Some(scenario),
                                train_rate: rate,
                                test_rates: config.test_rates.clone().unwrap_or_else(|| vec![rate]),
                                imputer: Some(config.imputer_options.spec(imputer)),
                                ..base(d, model, seed)
                            });
                        }
                    }
                }
            }
        }
    }
    if config.baselines {
        for d in datasets {
            for &model in &config.models {
                for &seed in &config.seeds {
                    out.push(base(d, model, seed));
                }
            }
        }
    }
    Ok(out)
}
