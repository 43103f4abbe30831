//! Imputers with a fit-on-train / transform-anything contract. A
//! [`FittedImputer`] holds every learned parameter; `transform` never
//! re-estimates anything from the dataset it is applied to.

mod clustering;
mod missforest;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Cell, ColumnKind, Dataset, NULL_CODE};
use crate::error::{Error, Result};

pub use clustering::{fit_clustering, ClusterModel};
pub use missforest::{fit_miss_forest, ColumnForest, ForestImputer, IterationChange};

pub const IMPUTER_FORMAT_VERSION: u32 = 1;
pub const DUMMY_LABEL: &str = "__missing__";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputerKind {
    Deletion,
    MedianMode,
    MedianDummy,
    Clustering,
    MissForest,
}

impl ImputerKind {
    pub const ALL: [ImputerKind; 5] = [
        ImputerKind::Deletion,
        ImputerKind::MedianMode,
        ImputerKind::MedianDummy,
        ImputerKind::Clustering,
        ImputerKind::MissForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImputerKind::Deletion => "deletion",
            ImputerKind::MedianMode => "median-mode",
            ImputerKind::MedianDummy => "median-dummy",
            ImputerKind::Clustering => "clustering",
            ImputerKind::MissForest => "miss-forest",
        }
    }
}

impl fmt::Display for ImputerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImputerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ImputerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown imputer kind `{s}`")))
    }
}

/// Tunables shared by all imputer kinds; [`ImputerOptions::spec`] keeps only
/// those that matter for one kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputerOptions {
    pub clustering_k: Option<usize>,
    pub clustering_max_iter: usize,
    pub clustering_restarts: usize,
    pub forest_trees: usize,
    pub forest_max_iter: usize,
    pub forest_tol: f64,
}

impl Default for ImputerOptions {
    fn default() -> Self {
        ImputerOptions {
            clustering_k: None,
            clustering_max_iter: 100,
            clustering_restarts: 4,
            forest_trees: 100,
            forest_max_iter: 10,
            forest_tol: 1e-3,
        }
    }
}

impl ImputerOptions {
    pub fn spec(&self, kind: ImputerKind) -> ImputerSpec {
        match kind {
            ImputerKind::Deletion => ImputerSpec::Deletion,
            ImputerKind::MedianMode => ImputerSpec::MedianMode,
            ImputerKind::MedianDummy => ImputerSpec::MedianDummy,
            ImputerKind::Clustering => ImputerSpec::Clustering {
                k: self.clustering_k,
                max_iter: self.clustering_max_iter,
                restarts: self.clustering_restarts,
            },
            ImputerKind::MissForest => ImputerSpec::MissForest {
                n_trees: self.forest_trees,
                max_iter: self.forest_max_iter,
                tol: self.forest_tol,
            },
        }
    }
}

/// An imputer kind with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ImputerSpec {
    Deletion,
    MedianMode,
    MedianDummy,
    Clustering {
        k: Option<usize>,
        max_iter: usize,
        restarts: usize,
    },
    MissForest {
        n_trees: usize,
        max_iter: usize,
        tol: f64,
    },
}

impl ImputerSpec {
    pub fn kind(&self) -> ImputerKind {
        match self {
            ImputerSpec::Deletion => ImputerKind::Deletion,
            ImputerSpec::MedianMode => ImputerKind::MedianMode,
            ImputerSpec::MedianDummy => ImputerKind::MedianDummy,
            ImputerSpec::Clustering { .. } => ImputerKind::Clustering,
            ImputerSpec::MissForest { .. } => ImputerKind::MissForest,
        }
    }
}

/// A per-column fill value; categoricals are stored by label so fills
/// survive category-list differences between datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    Num(f64),
    Cat(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ImputerParams {
    Deletion,
    Statistical { fills: Vec<Fill> },
    Clustering(ClusterModel),
    MissForest(ForestImputer),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedImputer {
    pub format_version: u32,
    pub spec: ImputerSpec,
    pub fit_seed: u64,
    pub schema_fingerprint: String,
    pub columns: Vec<String>,
    pub params: ImputerParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillSource {
    Constant,
    Cluster(usize),
    Forest,
    /// Miss-forest column that had no nulls at fit time, so no forest was
    /// trained for it; the initialization statistic is used.
    Initial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilledCell {
    pub row: usize,
    pub column: usize,
    pub source: FillSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputationResult {
    pub dataset: Dataset,
    pub filled: Vec<FilledCell>,
    /// Indices into the input of the rows kept (deletion only).
    pub retained_rows: Option<Vec<usize>>,
    pub retained_fraction: f64,
}

impl FittedImputer {
    pub fn kind(&self) -> ImputerKind {
        self.spec.kind()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<FittedImputer> {
        let f: FittedImputer = serde_json::from_str(s)?;
        if f.format_version != IMPUTER_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: f.format_version,
                expected: IMPUTER_FORMAT_VERSION,
            });
        }
        Ok(f)
    }

    fn new(spec: ImputerSpec, seed: u64, train: &Dataset, params: ImputerParams) -> FittedImputer {
        FittedImputer {
            format_version: IMPUTER_FORMAT_VERSION,
            spec,
            fit_seed: seed,
            schema_fingerprint: train.schema().fingerprint(),
            columns: train.schema().columns.iter().map(|c| c.name.clone()).collect(),
            params,
        }
    }

    pub fn transform(&self, d: &Dataset) -> Result<ImputationResult> {
        if d.schema().fingerprint() != self.schema_fingerprint {
            return Err(Error::Contract(format!(
                "dataset schema {} does not match the imputer's {}",
                d.schema().fingerprint(),
                self.schema_fingerprint
            )));
        }
        match &self.params {
            ImputerParams::Deletion => delete_rows(d),
            ImputerParams::Statistical { fills } => {
                let mut out = d.clone();
                if self.kind() == ImputerKind::MedianDummy {
                    for j in 0..out.n_cols() {
                        if out.column_schema(j).kind == ColumnKind::Categorical {
                            out.ensure_category(j, DUMMY_LABEL)?;
                        }
                    }
                }
                let mut filled = Vec::new();
                for j in 0..d.n_cols() {
                    for r in 0..d.n_rows() {
                        if d.is_null(r, j) {
                            write_fill(&mut out, r, j, &fills[j])?;
                            filled.push(FilledCell {
                                row: r,
                                column: j,
                                source: FillSource::Constant,
                            });
                        }
                    }
                }
                Ok(completed(out, filled))
            }
            ImputerParams::Clustering(m) => m.transform(d),
            ImputerParams::MissForest(m) => m.transform(d),
        }
    }
}

pub(crate) fn completed(dataset: Dataset, mut filled: Vec<FilledCell>) -> ImputationResult {
    filled.sort_by_key(|c| (c.row, c.column));
    ImputationResult {
        dataset,
        filled,
        retained_rows: None,
        retained_fraction: 1.0,
    }
}

pub(crate) fn write_fill(out: &mut Dataset, row: usize, col: usize, fill: &Fill) -> Result<()> {
    let cell = match fill {
        Fill::Num(x) => Cell::Num(*x),
        Fill::Cat(label) => Cell::Cat(out.ensure_category(col, label)?),
    };
    out.set_cell(row, col, cell)
}

/// Fits the imputer described by `spec` on `train`.
pub fn fit(train: &Dataset, spec: &ImputerSpec, seed: u64) -> Result<FittedImputer> {
    match *spec {
        ImputerSpec::Deletion => Ok(FittedImputer::new(spec.clone(), seed, train, ImputerParams::Deletion)),
        ImputerSpec::MedianMode | ImputerSpec::MedianDummy => fit_statistical(train, spec.kind()),
        ImputerSpec::Clustering { k, max_iter, restarts } => fit_clustering(train, k, seed, max_iter, restarts),
        ImputerSpec::MissForest { n_trees, max_iter, tol } => fit_miss_forest(train, seed, n_trees, max_iter, tol),
    }
}

/// Drops every row holding at least one null.
pub fn delete_rows(d: &Dataset) -> Result<ImputationResult> {
    let keep = d.complete_rows();
    if keep.is_empty() {
        return Err(Error::EmptyResult(format!("deletion removed all {} rows", d.n_rows())));
    }
    let fraction = keep.len() as f64 / d.n_rows() as f64;
    Ok(ImputationResult {
        dataset: d.select_rows(&keep),
        filled: Vec::new(),
        retained_rows: Some(keep),
        retained_fraction: fraction,
    })
}

/// Lower median: the `⌊(n−1)/2⌋`-th order statistic.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// Most frequent code; ties go to the lowest code.
pub(crate) fn mode_code(counts: &[usize]) -> Option<u32> {
    let mut best: Option<usize> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|b| c > counts[b]) {
            best = Some(i);
        }
    }
    best.map(|b| b as u32)
}

fn unfittable(d: &Dataset, j: usize) -> Error {
    Error::Unfittable(format!("column `{}` has no observed values", d.column_schema(j).name))
}

/// Median (numerical) and mode (categorical) of observed training values.
pub(crate) fn central_fills(train: &Dataset) -> Result<Vec<Fill>> {
    (0..train.n_cols())
        .map(|j| match train.column_schema(j).kind {
            ColumnKind::Numerical => lower_median(&train.observed_numbers(j)).map(Fill::Num).ok_or_else(|| unfittable(train, j)),
            ColumnKind::Categorical => mode_code(&train.category_counts(j))
                .map(|c| Fill::Cat(train.category_label(j, c).to_owned()))
                .ok_or_else(|| unfittable(train, j)),
        })
        .collect()
}

pub fn fit_statistical(train: &Dataset, kind: ImputerKind) -> Result<FittedImputer> {
    let spec = match kind {
        ImputerKind::MedianMode => ImputerSpec::MedianMode,
        ImputerKind::MedianDummy => ImputerSpec::MedianDummy,
        other => return Err(Error::Config(format!("`{other}` is not a statistical imputer"))),
    };
    let mut fills = central_fills(train)?;
    if kind == ImputerKind::MedianDummy {
        for (j, f) in fills.iter_mut().enumerate() {
            if train.column_schema(j).kind == ColumnKind::Categorical {
                *f = Fill::Cat(DUMMY_LABEL.to_owned());
            }
        }
    }
    Ok(FittedImputer::new(spec, 0, train, ImputerParams::Statistical { fills }))
}

/// Label text of a categorical cell, if observed.
pub(crate) fn label_of(d: &Dataset, row: usize, col: usize) -> Option<&str> {
    match d.cell(row, col) {
        Cell::Cat(c) if c != NULL_CODE => Some(d.category_label(col, c)),
        _ => None,
    }
}
