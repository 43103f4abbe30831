//! Iterative random-forest imputation. Categoricals enter the feature matrix
//! as ordinal codes of the training category list.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{central_fills, completed, write_fill, Fill, FillSource, FilledCell, FittedImputer, ImputationResult, ImputerParams, ImputerSpec};
use crate::dataset::{Cell, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::models::{Forest, ForestParams, Matrix, Target};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnForest {
    pub column: usize,
    pub forest: Forest,
}

/// Per-iteration change of the fills: relative squared change for
/// numericals, flip fraction for categoricals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationChange {
    pub numerical: f64,
    pub categorical: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestImputer {
    pub init: Vec<Fill>,
    /// Training category lists, defining the ordinal encoding.
    pub categories: Vec<Option<Vec<String>>>,
    pub order: Vec<usize>,
    pub forests: Vec<ColumnForest>,
    pub iterations: usize,
    pub changes: Vec<IterationChange>,
}

impl ForestImputer {
    /// Encodes `d` with nulls seeded from the initialization statistics.
    fn encode(&self, d: &Dataset) -> Matrix {
        let p = d.n_cols();
        let mut m = Matrix::zeros(d.n_rows(), p);
        for j in 0..p {
            let init = match &self.init[j] {
                Fill::Num(x) => *x,
                Fill::Cat(l) => self.code(j, l),
            };
            let local: Option<Vec<f64>> = self.categories[j]
                .as_ref()
                .map(|_| d.column_schema(j).category_list().iter().map(|l| self.code(j, l)).collect());
            for r in 0..d.n_rows() {
                let v = match d.cell(r, j) {
                    Cell::Num(x) => x,
                    Cell::Cat(c) => local.as_ref().map_or(0.0, |l| l[c as usize]),
                    Cell::Null => init,
                };
                m.set(r, j, v);
            }
        }
        m
    }

    /// Training code of a label; unseen labels map one past the end.
    fn code(&self, j: usize, label: &str) -> f64 {
        let cats = self.categories[j].as_deref().unwrap_or(&[]);
        cats.iter().position(|c| c == label).unwrap_or(cats.len()) as f64
    }

    fn predict(forest: &Forest, kind: ColumnKind, x: &Matrix, row: usize, skip: usize, buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend(x.row(row).iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v));
        match kind {
            ColumnKind::Numerical => forest.predict_value(buf),
            ColumnKind::Categorical => forest.predict_class(buf) as f64,
        }
    }

    pub(super) fn transform(&self, d: &Dataset) -> Result<ImputationResult> {
        let mut x = self.encode(d);
        let mut buf = Vec::new();
        let mut source = HashMap::new();
        for cf in &self.forests {
            let j = cf.column;
            let kind = d.column_schema(j).kind;
            for r in 0..d.n_rows() {
                if d.is_null(r, j) {
                    let v = Self::predict(&cf.forest, kind, &x, r, j, &mut buf);
                    x.set(r, j, v);
                    source.insert(j, FillSource::Forest);
                }
            }
        }
        let mut out = d.clone();
        let mut filled = Vec::new();
        for j in 0..d.n_cols() {
            let src = source.get(&j).copied().unwrap_or(FillSource::Initial);
            for r in 0..d.n_rows() {
                if !d.is_null(r, j) {
                    continue;
                }
                let fill = match &self.categories[j] {
                    None => Fill::Num(x.get(r, j)),
                    Some(cats) => Fill::Cat(cats[x.get(r, j) as usize].clone()),
                };
                write_fill(&mut out, r, j, &fill)?;
                filled.push(FilledCell { row: r, column: j, source: src });
            }
        }
        Ok(completed(out, filled))
    }
}

fn column_features(x: &Matrix, rows: &[usize], skip: usize) -> Matrix {
    let p = x.n_cols() - 1;
    let mut data = Vec::with_capacity(rows.len() * p);
    for &r in rows {
        data.extend(x.row(r).iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| *v));
    }
    Matrix::from_vec(rows.len(), p, data)
}

/// Fits miss-forest on `train`: columns are visited in ascending order of
/// null count, each refit on the currently completed other columns, until
/// both change statistics drop below `tol` or `max_iter` passes ran.
pub fn fit_miss_forest(train: &Dataset, seed: u64, n_trees: usize, max_iter: usize, tol: f64) -> Result<FittedImputer> {
    let p = train.n_cols();
    if p < 2 {
        return Err(Error::Unfittable("miss-forest needs at least two columns".into()));
    }
    if max_iter == 0 || n_trees == 0 {
        return Err(Error::Config("miss-forest needs positive max_iter and tree count".into()));
    }
    let init = central_fills(train)?;
    let categories = (0..p)
        .map(|j| match train.column_schema(j).kind {
            ColumnKind::Numerical => None,
            ColumnKind::Categorical => Some(train.column_schema(j).category_list().to_vec()),
        })
        .collect();
    let mut model = ForestImputer {
        init,
        categories,
        order: Vec::new(),
        forests: Vec::new(),
        iterations: 0,
        changes: Vec::new(),
    };
    let mut order: Vec<usize> = (0..p).filter(|&j| train.mask().column_count(j) > 0).collect();
    order.sort_by_key(|&j| (train.mask().column_count(j), j));
    model.order = order.clone();
    let mut x = model.encode(train);
    let mut buf = Vec::new();
    let mut forests: Vec<ColumnForest> = Vec::new();
    for iter in 0..max_iter {
        let before = x.clone();
        forests.clear();
        for &j in &order {
            let kind = train.column_schema(j).kind;
            let observed: Vec<usize> = (0..train.n_rows()).filter(|&r| !train.is_null(r, j)).collect();
            let missing: Vec<usize> = (0..train.n_rows()).filter(|&r| train.is_null(r, j)).collect();
            let features = column_features(&x, &observed, j);
            let y: Vec<f64> = observed.iter().map(|&r| x.get(r, j)).collect();
            let fs = rng::derive(seed, &[iter as u64, j as u64]);
            let forest = match kind {
                ColumnKind::Numerical => Forest::fit(&features, Target::Values(&y), &ForestParams::regressor(n_trees), fs)?,
                ColumnKind::Categorical => {
                    let codes: Vec<u32> = y.iter().map(|&v| v as u32).collect();
                    let n_classes = model.categories[j].as_ref().map_or(0, Vec::len);
                    let target = Target::Classes { y: &codes, n_classes };
                    Forest::fit(&features, target, &ForestParams::classifier(n_trees), fs)?
                }
            };
            for &r in &missing {
                let v = ForestImputer::predict(&forest, kind, &x, r, j, &mut buf);
                x.set(r, j, v);
            }
            forests.push(ColumnForest { column: j, forest });
        }
        let change = change_between(train, &before, &x);
        model.changes.push(change);
        model.iterations = iter + 1;
        if change.numerical < tol && change.categorical < tol {
            break;
        }
    }
    model.forests = forests;
    Ok(FittedImputer::new(
        ImputerSpec::MissForest { n_trees, max_iter, tol },
        seed,
        train,
        ImputerParams::MissForest(model),
    ))
}

fn change_between(d: &Dataset, before: &Matrix, after: &Matrix) -> IterationChange {
    let (mut num, mut den, mut flips, mut cats) = (0.0, 0.0, 0usize, 0usize);
    for j in 0..d.n_cols() {
        let kind = d.column_schema(j).kind;
        for r in 0..d.n_rows() {
            if !d.is_null(r, j) {
                continue;
            }
            let (a, b) = (before.get(r, j), after.get(r, j));
            match kind {
                ColumnKind::Numerical => {
                    num += (b - a) * (b - a);
                    den += b * b;
                }
                ColumnKind::Categorical => {
                    cats += 1;
                    flips += (a != b) as usize;
                }
            }
        }
    }
    IterationChange {
        numerical: if den > 0.0 { num / den } else { 0.0 },
        categorical: if cats > 0 { flips as f64 / cats as f64 } else { 0.0 },
    }
}
