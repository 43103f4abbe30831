//! Preprocessing, the model zoo (logistic regression, CART, random forest),
//! grid tuning, bootstrap ensembles and BoostClean.

mod boostclean;
mod forest;
mod logistic;
mod matrix;
mod preprocess;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::model_scores;
use crate::rng;

pub use boostclean::{alpha, boostclean_train, select_candidate, BoostClean, BoostMember, BoostParams};
pub use forest::{Forest, ForestParams};
pub use logistic::{loss_and_gradient, Logistic, Penalty};
pub use matrix::Matrix;
pub use preprocess::{Encoding, Preprocessor};
pub use tree::{Criterion, MaxFeatures, Node, Target, Tree, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[serde(alias = "lr")]
    LogisticRegression,
    #[serde(alias = "dt")]
    DecisionTree,
    #[serde(alias = "rf")]
    RandomForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::LogisticRegression, ModelKind::DecisionTree, ModelKind::RandomForest];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "logistic-regression",
            ModelKind::DecisionTree => "decision-tree",
            ModelKind::RandomForest => "random-forest",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            ModelKind::LogisticRegression => "lr",
            ModelKind::DecisionTree => "dt",
            ModelKind::RandomForest => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.short() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

/// Maximum tree depth; serialized as an integer or `"none"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Depth(pub Option<usize>);

impl Serialize for Depth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(d) => s.serialize_u64(d as u64),
            None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Depth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Depth(Some(n))),
            Raw::S(s) if s == "none" => Ok(Depth(None)),
            Raw::S(s) => Err(serde::de::Error::custom(format!("max depth must be an integer or \"none\", got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HyperParams {
    LogisticRegression {
        penalty: Penalty,
        c: f64,
        max_iter: usize,
    },
    DecisionTree {
        max_depth: Depth,
        min_samples_leaf: usize,
        criterion: Criterion,
    },
    RandomForest {
        n_trees: usize,
        max_depth: Depth,
        min_samples_split: usize,
        min_samples_leaf: usize,
    },
}

impl HyperParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            HyperParams::LogisticRegression { .. } => ModelKind::LogisticRegression,
            HyperParams::DecisionTree { .. } => ModelKind::DecisionTree,
            HyperParams::RandomForest { .. } => ModelKind::RandomForest,
        }
    }
}

fn lr_penalty() -> Vec<Penalty> {
    vec![Penalty::None, Penalty::L2]
}
fn lr_c() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0]
}
fn lr_max_iter() -> Vec<usize> {
    vec![100]
}
fn dt_depth() -> Vec<Depth> {
    vec![Depth(Some(3)), Depth(Some(5)), Depth(Some(10)), Depth(None)]
}
fn dt_leaf() -> Vec<usize> {
    vec![1, 5, 10]
}
fn dt_criterion() -> Vec<Criterion> {
    vec![Criterion::Gini, Criterion::Entropy]
}
fn rf_trees() -> Vec<usize> {
    vec![50, 100]
}
fn rf_depth() -> Vec<Depth> {
    vec![Depth(Some(5)), Depth(Some(10)), Depth(None)]
}
fn rf_split() -> Vec<usize> {
    vec![2, 10]
}
fn rf_leaf() -> Vec<usize> {
    vec![1, 5]
}

/// Finite search grid per model kind; omitted fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HyperGrid {
    LogisticRegression {
        #[serde(default = "lr_penalty")]
        penalty: Vec<Penalty>,
        #[serde(default = "lr_c")]
        c: Vec<f64>,
        #[serde(default = "lr_max_iter")]
        max_iter: Vec<usize>,
    },
    DecisionTree {
        #[serde(default = "dt_depth")]
        max_depth: Vec<Depth>,
        #[serde(default = "dt_leaf")]
        min_samples_leaf: Vec<usize>,
        #[serde(default = "dt_criterion")]
        criterion: Vec<Criterion>,
    },
    RandomForest {
        #[serde(default = "rf_trees")]
        n_trees: Vec<usize>,
        #[serde(default = "rf_depth")]
        max_depth: Vec<Depth>,
        #[serde(default = "rf_split")]
        min_samples_split: Vec<usize>,
        #[serde(default = "rf_leaf")]
        min_samples_leaf: Vec<usize>,
    },
}

impl HyperGrid {
    pub fn default_for(kind: ModelKind) -> HyperGrid {
        match kind {
            ModelKind::LogisticRegression => HyperGrid::LogisticRegression {
                penalty: lr_penalty(),
                c: lr_c(),
                max_iter: lr_max_iter(),
            },
            ModelKind::DecisionTree => HyperGrid::DecisionTree {
                max_depth: dt_depth(),
                min_samples_leaf: dt_leaf(),
                criterion: dt_criterion(),
            },
            ModelKind::RandomForest => HyperGrid::RandomForest {
                n_trees: rf_trees(),
                max_depth: rf_depth(),
                min_samples_split: rf_split(),
                min_samples_leaf: rf_leaf(),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            HyperGrid::LogisticRegression { .. } => ModelKind::LogisticRegression,
            HyperGrid::DecisionTree { .. } => ModelKind::DecisionTree,
            HyperGrid::RandomForest { .. } => ModelKind::RandomForest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("{} grid: `{name}` has no values", self.kind())))
            } else {
                Ok(())
            }
        };
        match self {
            HyperGrid::LogisticRegression { penalty, c, max_iter } => {
                empty("penalty", penalty.len())?;
                empty("c", c.len())?;
                empty("max_iter", max_iter.len())?;
                if let Some(bad) = c.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::Config(format!("logistic-regression grid: C must be positive, got {bad}")));
                }
            }
            HyperGrid::DecisionTree {
                max_depth,
                min_samples_leaf,
                criterion,
            } => {
                empty("max_depth", max_depth.len())?;
                empty("min_samples_leaf", min_samples_leaf.len())?;
                empty("criterion", criterion.len())?;
                if criterion.contains(&Criterion::Mse) {
                    return Err(Error::Config("decision-tree grid: criterion must be gini or entropy".into()));
                }
            }
            HyperGrid::RandomForest {
                n_trees,
                max_depth,
                min_samples_split,
                min_samples_leaf,
            } => {
                empty("n_trees", n_trees.len())?;
                empty("max_depth", max_depth.len())?;
                empty("min_samples_split", min_samples_split.len())?;
                empty("min_samples_leaf", min_samples_leaf.len())?;
                if n_trees.contains(&0) {
                    return Err(Error::Config("random-forest grid: n_trees must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Grid points in declaration order, last field varying fastest. An
    /// unpenalized logistic regression ignores `c` and appears once per
    /// `max_iter` value.
    pub fn points(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        match self {
            HyperGrid::LogisticRegression { penalty, c, max_iter } => {
                for &p in penalty {
                    let cs: &[f64] = if p == Penalty::None { &c[..1] } else { c };
                    for &c in cs {
                        for &m in max_iter {
                            out.push(HyperParams::LogisticRegression {
                                penalty: p,
                                c,
                                max_iter: m,
                            });
                        }
                    }
                }
            }
            HyperGrid::DecisionTree {
                max_depth,
                min_samples_leaf,
                criterion,
            } => {
                for &d in max_depth {
                    for &l in min_samples_leaf {
                        for &c in criterion {
                            out.push(HyperParams::DecisionTree {
                                max_depth: d,
                                min_samples_leaf: l,
                                criterion: c,
                            });
                        }
                    }
                }
            }
            HyperGrid::RandomForest {
                n_trees,
                max_depth,
                min_samples_split,
                min_samples_leaf,
            } => {
                for &t in n_trees {
                    for &d in max_depth {
                        for &s in min_samples_split {
                            for &l in min_samples_leaf {
                                out.push(HyperParams::RandomForest {
                                    n_trees: t,
                                    max_depth: d,
                                    min_samples_split: s,
                                    min_samples_leaf: l,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A fitted estimator operating on preprocessed features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Estimator {
    Logistic(Logistic),
    Tree(Tree),
    Forest(Forest),
}

impl Estimator {
    pub fn fit(x: &Matrix, y: &[u8], params: &HyperParams, seed: u64) -> Result<Estimator> {
        if y.is_empty() || y.len() != x.n_rows() {
            return Err(Error::Training("empty or mismatched training set".into()));
        }
        if y.iter().all(|&v| v == y[0]) {
            return Err(Error::Training(format!("training labels contain a single class ({})", y[0])));
        }
        let classes: Vec<u32> = y.iter().map(|&v| v as u32).collect();
        let target = Target::Classes { y: &classes, n_classes: 2 };
        Ok(match *params {
            HyperParams::LogisticRegression { penalty, c, max_iter } => Estimator::Logistic(Logistic::fit(x, y, penalty, c, max_iter, 1e-6)?),
            HyperParams::DecisionTree {
                max_depth,
                min_samples_leaf,
                criterion,
            } => {
                let tp = TreeParams {
                    max_depth: max_depth.0,
                    min_samples_split: 2,
                    min_samples_leaf,
                    criterion,
                    max_features: MaxFeatures::All,
                };
                Estimator::Tree(Tree::fit(x, target, None, &tp, &mut rng::seeded(seed))?)
            }
            HyperParams::RandomForest {
                n_trees,
                max_depth,
                min_samples_split,
                min_samples_leaf,
            } => {
                let fp = ForestParams {
                    n_trees,
                    tree: TreeParams {
                        max_depth: max_depth.0,
                        min_samples_split,
                        min_samples_leaf,
                        criterion: Criterion::Gini,
                        max_features: MaxFeatures::Sqrt,
                    },
                    bootstrap: true,
                };
                Estimator::Forest(Forest::fit(x, target, &fp, seed)?)
            }
        })
    }

    /// Positive-class score in [0, 1]: probability for logistic regression
    /// and trees, the positive vote share for forests.
    pub fn score(&self, row: &[f64]) -> f64 {
        match self {
            Estimator::Logistic(m) => m.score(row),
            Estimator::Tree(t) => t.leaf(row)[1],
            Estimator::Forest(f) => {
                let votes = f.trees.iter().filter(|t| t.leaf(row)[1] >= 0.5).count();
                votes as f64 / f.trees.len() as f64
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Predictions {
        let scores: Vec<f64> = (0..x.n_rows()).map(|r| self.score(x.row(r))).collect();
        Predictions {
            labels: scores.iter().map(|&s| (s >= 0.5) as u8).collect(),
            scores,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub params: HyperParams,
    pub seed: u64,
    pub preprocessor: Preprocessor,
    pub estimator: Estimator,
}

/// Fits preprocessing and the estimator on a completed training set.
pub fn train(train: &Dataset, params: &HyperParams, seed: u64) -> Result<TrainedModel> {
    let preprocessor = Preprocessor::fit(train)?;
    let x = preprocessor.apply(train)?;
    train_with(preprocessor, &x, train.labels(), params, seed)
}

/// Fits the estimator on already-preprocessed features.
pub fn train_with(preprocessor: Preprocessor, x: &Matrix, y: &[u8], params: &HyperParams, seed: u64) -> Result<TrainedModel> {
    let estimator = Estimator::fit(x, y, params, seed)?;
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: params.kind(),
        params: params.clone(),
        seed,
        preprocessor,
        estimator,
    })
}

impl TrainedModel {
    pub fn predict(&self, d: &Dataset) -> Result<Predictions> {
        Ok(self.estimator.predict(&self.preprocessor.apply(d)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<TrainedModel> {
        let m: TrainedModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: m.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: HyperParams,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// Folds whose training part held a single class (scored 0).
    pub flagged_folds: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub chosen: HyperParams,
    pub table: Vec<GridScore>,
}

/// Seeded fold assignment: shuffled positions cut into `k` near-equal parts.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, r) in idx.into_iter().enumerate() {
        folds[i * k / n.max(1)].push(r);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    folds
}

/// k-fold cross-validated grid search on mean F1; ties go to the earlier
/// grid point.
pub fn tune(x: &Matrix, y: &[u8], grid: &HyperGrid, k_folds: usize, seed: u64) -> Result<TuneReport> {
    grid.validate()?;
    if k_folds < 2 {
        return Err(Error::Config(format!("k_folds must be at least 2, got {k_folds}")));
    }
    if x.n_rows() < k_folds {
        return Err(Error::Training(format!("{} rows cannot form {k_folds} folds", x.n_rows())));
    }
    let folds = kfold_indices(x.n_rows(), k_folds, seed);
    let splits: Vec<(Matrix, Vec<u8>, Matrix, Vec<u8>)> = folds
        .iter()
        .map(|val| {
            let mut in_val = vec![false; x.n_rows()];
            val.iter().for_each(|&r| in_val[r] = true);
            let tr: Vec<usize> = (0..x.n_rows()).filter(|&r| !in_val[r]).collect();
            (
                x.select_rows(&tr),
                tr.iter().map(|&r| y[r]).collect(),
                x.select_rows(val),
                val.iter().map(|&r| y[r]).collect(),
            )
        })
        .collect();
    let points = grid.points();
    let table = points
        .par_iter()
        .map(|params| -> Result<GridScore> {
            let mut fold_f1 = Vec::with_capacity(k_folds);
            let mut flagged = Vec::new();
            for (f, (xt, yt, xv, yv)) in splits.iter().enumerate() {
                if yt.iter().all(|&v| v == yt[0]) {
                    fold_f1.push(0.0);
                    flagged.push(f);
                    continue;
                }
                let est = Estimator::fit(xt, yt, params, rng::derive(seed, &[f as u64]))?;
                fold_f1.push(model_scores(yv, &est.predict(xv).labels)?.f1);
            }
            Ok(GridScore {
                params: params.clone(),
                mean_f1: fold_f1.iter().sum::<f64>() / k_folds as f64,
                fold_f1,
                flagged_folds: flagged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, g) in table.iter().enumerate() {
        if g.mean_f1 > table[best].mean_f1 {
            best = i;
        }
    }
    Ok(TuneReport {
        chosen: table[best].params.clone(),
        table,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    pub params: HyperParams,
    pub subsample: f64,
    pub seed: u64,
    pub members: Vec<Estimator>,
    /// Rejected draws (single-class subsamples) per member.
    pub retries: Vec<usize>,
}

const MAX_MEMBER_ATTEMPTS: usize = 6;

/// Rows seen by each ensemble member: `round(fraction · n)`.
pub fn subsample_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

impl BootstrapEnsemble {
    /// Trains `b` members, each on a seeded subsample without replacement of
    /// `round(subsample · n)` rows.
    pub fn fit(x: &Matrix, y: &[u8], params: &HyperParams, b: usize, subsample: f64, seed: u64) -> Result<BootstrapEnsemble> {
        if b == 0 {
            return Err(Error::Config("ensemble size B must be at least 1".into()));
        }
        if !(subsample > 0.0 && subsample <= 1.0) {
            return Err(Error::Config(format!("subsample fraction must be in (0, 1], got {subsample}")));
        }
        let n = x.n_rows();
        let size = subsample_size(n, subsample);
        if size < 2 {
            return Err(Error::Training(format!("subsample of {size} rows is too small")));
        }
        let built = (0..b)
            .into_par_iter()
            .map(|i| -> Result<(Estimator, usize)> {
                for attempt in 0..MAX_MEMBER_ATTEMPTS {
                    let s = rng::derive(seed, &[i as u64, attempt as u64]);
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng::seeded(s));
                    idx.truncate(size);
                    idx.sort_unstable();
                    let ys: Vec<u8> = idx.iter().map(|&r| y[r]).collect();
                    if ys.iter().all(|&v| v == ys[0]) {
                        continue;
                    }
                    return Ok((Estimator::fit(&x.select_rows(&idx), &ys, params, s)?, attempt));
                }
                Err(Error::Training(format!(
                    "ensemble member {i}: every subsample drawn held a single class"
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        let (members, retries) = built.into_iter().unzip();
        Ok(BootstrapEnsemble {
            params: params.clone(),
            subsample,
            seed,
            members,
            retries,
        })
    }

    /// `B × N` label matrix; row `i` holds member `i`'s labels.
    pub fn predict(&self, x: &Matrix) -> Vec<Vec<u8>> {
        self.members.iter().map(|m| m.predict(x).labels).collect()
    }
}
