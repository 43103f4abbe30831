use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, MaxFeatures, Target, Tree, TreeParams};
use super::Matrix;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

/// Bagged CART. Classification leaves hold class distributions, which are
/// averaged across trees; regression leaves hold means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_outputs: usize,
}

impl Forest {
    pub fn fit(x: &Matrix, target: Target<'_>, params: &ForestParams, seed: u64) -> Result<Forest> {
        if params.n_trees == 0 {
            return Err(Error::Training("forest needs at least one tree".into()));
        }
        let n = x.n_rows();
        let n_outputs = match target {
            Target::Classes { n_classes, .. } => n_classes,
            Target::Values(_) => 1,
        };
        // Trees are independent; collect keeps index order.
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut r = rng::seeded(rng::derive(seed, &[t as u64]));
                let weights = params.bootstrap.then(|| {
                    let mut w = vec![0u32; n];
                    for _ in 0..n {
                        w[r.random_range(0..n)] += 1;
                    }
                    w
                });
                Tree::fit(x, target, weights.as_deref(), &params.tree, &mut r)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forest { trees, n_outputs })
    }

    /// Mean leaf vector over trees for one row.
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_outputs];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.leaf(row)) {
                *a += v;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    pub fn predict_value(&self, row: &[f64]) -> f64 {
        self.predict_row(row)[0]
    }

    /// Most probable class; ties go to the lowest code.
    pub fn predict_class(&self, row: &[f64]) -> u32 {
        argmax(&self.predict_row(row)) as u32
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl ForestParams {
    pub fn classifier(n_trees: usize) -> Self {
        ForestParams {
            n_trees,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
            bootstrap: true,
        }
    }

    pub fn regressor(n_trees: usize) -> Self {
        ForestParams {
            n_trees,
            tree: TreeParams {
                criterion: Criterion::Mse,
                max_features: MaxFeatures::Third,
                min_samples_leaf: 1,
                ..TreeParams::default()
            },
            bootstrap: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unbagged_tree_equals_cart() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64, (i % 5) as f64, (i / 3) as f64]).collect();
        let y: Vec<u32> = (0..40).map(|i| ((i % 7) + (i % 5) > 5) as u32).collect();
        let x = Matrix::from_rows(&rows);
        let target = Target::Classes { y: &y, n_classes: 2 };
        let params = ForestParams {
            n_trees: 1,
            tree: TreeParams::default(),
            bootstrap: false,
        };
        let f = Forest::fit(&x, target, &params, 5).unwrap();
        let t = Tree::fit(&x, target, None, &TreeParams::default(), &mut rng::seeded(0)).unwrap();
        for r in 0..x.n_rows() {
            assert_eq!(f.predict_row(x.row(r)), t.leaf(x.row(r)));
        }
    }

    #[test]
    fn regressor_tracks_linear_target() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let f = Forest::fit(&Matrix::from_rows(&rows), Target::Values(&y), &ForestParams::regressor(30), 1).unwrap();
        for x in [1.05, 7.33, 15.0] {
            assert!((f.predict_value(&[x]) - 2.0 * x).abs() < 0.5, "{x}");
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i * 7 % 11) as f64, (i % 4) as f64]).collect();
        let y: Vec<u32> = (0..60).map(|i| (i * 7 % 11 > 4) as u32).collect();
        let x = Matrix::from_rows(&rows);
        let t = Target::Classes { y: &y, n_classes: 2 };
        let a = Forest::fit(&x, t, &ForestParams::classifier(10), 9).unwrap();
        let b = Forest::fit(&x, t, &ForestParams::classifier(10), 9).unwrap();
        assert_eq!(a, b);
    }
}
