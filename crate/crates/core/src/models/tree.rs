//! CART for classification (gini/entropy) and regression (squared error)
//! with integer sample weights, so bootstrap draws are expressed as counts.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
    Mse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Third,
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Sqrt => (p as f64).sqrt().floor() as usize,
            MaxFeatures::Third => p / 3,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::All,
        }
    }
}

/// Training targets: class codes `< n_classes`, or real values.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Classes { y: &'a [u32], n_classes: usize },
    Values(&'a [f64]),
}

impl Target<'_> {
    fn len(&self) -> usize {
        match self {
            Target::Classes { y, .. } => y.len(),
            Target::Values(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class distribution, or a single mean for regression.
    Leaf(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

struct Best {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Builder<'a> {
    x: &'a Matrix,
    target: Target<'a>,
    weights: &'a [u32],
    params: TreeParams,
    n_try: usize,
    nodes: Vec<Node>,
    features: Vec<usize>,
    buf: Vec<(f64, usize)>,
}

impl Tree {
    /// Fits a tree on the rows with non-zero weight.
    pub fn fit(x: &Matrix, target: Target<'_>, weights: Option<&[u32]>, params: &TreeParams, rng: &mut Rng) -> Result<Tree> {
        let n = x.n_rows();
        if target.len() != n {
            return Err(Error::Training(format!("{} targets for {n} rows", target.len())));
        }
        if matches!(target, Target::Values(_)) != (params.criterion == Criterion::Mse) {
            return Err(Error::Training("criterion does not match the target type".into()));
        }
        let ones;
        let weights = match weights {
            Some(w) => w,
            None => {
                ones = vec![1u32; n];
                &ones
            }
        };
        let rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0).collect();
        if rows.is_empty() {
            return Err(Error::Training("no training rows".into()));
        }
        let mut b = Builder {
            x,
            target,
            weights,
            params: *params,
            n_try: params.max_features.resolve(x.n_cols()),
            nodes: Vec::new(),
            features: (0..x.n_cols()).collect(),
            buf: Vec::with_capacity(rows.len()),
        };
        let mut rows = rows;
        b.grow(&mut rows, 0, rng);
        Ok(Tree {
            nodes: b.nodes,
            n_features: x.n_cols(),
        })
    }

    pub fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn impurity(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * p.ln()
            })
            .sum::<f64>(),
        _ => 1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>(),
    }
}

impl Builder<'_> {
    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        match self.target {
            Target::Classes { y, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                let mut total = 0.0;
                for &r in rows {
                    let w = self.weights[r] as f64;
                    counts[y[r] as usize] += w;
                    total += w;
                }
                counts.iter_mut().for_each(|c| *c /= total);
                counts
            }
            Target::Values(v) => {
                let (mut s, mut w) = (0.0, 0.0);
                for &r in rows {
                    let wr = self.weights[r] as f64;
                    s += wr * v[r];
                    w += wr;
                }
                vec![s / w]
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.target {
            Target::Classes { y, .. } => rows.iter().all(|&r| y[r] == y[rows[0]]),
            Target::Values(v) => {
                let first = v[rows[0]];
                rows.iter().all(|&r| (v[r] - first).abs() <= 1e-12 * first.abs().max(1.0))
            }
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let weight: u64 = rows.iter().map(|&r| self.weights[r] as u64).sum();
        let can_split = self.params.max_depth.is_none_or(|d| depth < d)
            && weight as usize >= self.params.min_samples_split.max(2)
            && weight as usize >= 2 * self.params.min_samples_leaf.max(1)
            && !self.is_pure(rows);
        let best = if can_split { self.best_split(rows, rng) } else { None };
        let Some(best) = best else {
            self.nodes[id] = Node::Leaf(self.leaf_value(rows));
            return id;
        };
        // Stable partition keeps the row order deterministic.
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let n_left = l.len();
        rows[..n_left].copy_from_slice(&l);
        rows[n_left..].copy_from_slice(&r);
        let (lrows, rrows) = rows.split_at_mut(n_left);
        let left = self.grow(lrows, depth + 1, rng);
        let right = self.grow(rrows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize], rng: &mut Rng) -> Option<Best> {
        let p = self.x.n_cols();
        if self.n_try < p {
            self.features.shuffle(rng);
        }
        let mut best: Option<Best> = None;
        let mut tried = 0;
        for fi in 0..p {
            if tried >= self.n_try {
                break;
            }
            let f = self.features[fi];
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.x.get(r, f), r)));
            let lo = self.buf.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
            let hi = self.buf.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                continue;
            }
            tried += 1;
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((threshold, score)) = self.scan() {
                let better = match &best {
                    None => true,
                    Some(b) => score > b.score || (score == b.score && f < b.feature),
                };
                if better {
                    best = Some(Best {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    /// Scans the sorted buffer; returns the threshold maximizing the
    /// negated weighted child impurity.
    fn scan(&self) -> Option<(f64, f64)> {
        let min_leaf = self.params.min_samples_leaf.max(1) as f64;
        let buf = &self.buf;
        let w = |r: usize| self.weights[r] as f64;
        let total: f64 = buf.iter().map(|e| w(e.1)).sum();
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |i: usize, score: f64, wl: f64| {
            if wl < min_leaf || total - wl < min_leaf {
                return;
            }
            if best.is_none_or(|(_, s)| score > s) {
                let (a, b) = (buf[i].0, buf[i + 1].0);
                let mut t = a + (b - a) / 2.0;
                if t >= b {
                    t = a;
                }
                best = Some((t, score));
            }
        };
        match self.target {
            Target::Classes { y, n_classes } => {
                let mut right = vec![0.0; n_classes];
                for e in buf {
                    right[y[e.1] as usize] += w(e.1);
                }
                let mut left = vec![0.0; n_classes];
                let mut wl = 0.0;
                for i in 0..buf.len() - 1 {
                    let (v, r) = buf[i];
                    let c = y[r] as usize;
                    left[c] += w(r);
                    right[c] -= w(r);
                    wl += w(r);
                    if buf[i + 1].0 <= v {
                        continue;
                    }
                    let wr = total - wl;
                    let score = -(wl * impurity(&left, wl, self.params.criterion) + wr * impurity(&right, wr, self.params.criterion));
                    consider(i, score, wl);
                }
            }
            Target::Values(yv) => {
                let (mut s_tot, mut q_tot) = (0.0, 0.0);
                for e in buf {
                    s_tot += w(e.1) * yv[e.1];
                    q_tot += w(e.1) * yv[e.1] * yv[e.1];
                }
                let (mut sl, mut ql, mut wl) = (0.0, 0.0, 0.0);
                for i in 0..buf.len() - 1 {
                    let (v, r) = buf[i];
                    sl += w(r) * yv[r];
                    ql += w(r) * yv[r] * yv[r];
                    wl += w(r);
                    if buf[i + 1].0 <= v {
                        continue;
                    }
                    let wr = total - wl;
                    let sr = s_tot - sl;
                    let qr = q_tot - ql;
                    let sse = (ql - sl * sl / wl) + (qr - sr * sr / wr);
                    consider(i, -sse, wl);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn xor_is_learned_at_depth_two() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let y = [0u32, 1, 1, 0];
        let params = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, Target::Classes { y: &y, n_classes: 2 }, None, &params, &mut rng::seeded(0)).unwrap();
        for (i, &yi) in y.iter().enumerate() {
            let leaf = t.leaf(x.row(i));
            assert_eq!(leaf[yi as usize], 1.0);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn gini_split_matches_exhaustive_search() {
        // Split at 2.5 separates perfectly; any other threshold leaves mixing.
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]]);
        let y = [0u32, 0, 1, 1, 1];
        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, Target::Classes { y: &y, n_classes: 2 }, None, &params, &mut rng::seeded(0)).unwrap();
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 2.5),
            n => panic!("{n:?}"),
        }
    }

    #[test]
    fn weights_act_as_repeated_rows() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let y = [0.0, 10.0, 20.0];
        let params = TreeParams {
            max_depth: Some(0),
            criterion: Criterion::Mse,
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, Target::Values(&y), Some(&[2, 0, 1]), &params, &mut rng::seeded(0)).unwrap();
        assert!((t.leaf(&[0.0])[0] - 20.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn regression_split_minimizes_sse() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = [1.0, 1.0, 5.0, 5.0];
        let params = TreeParams {
            criterion: Criterion::Mse,
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, Target::Values(&y), None, &params, &mut rng::seeded(0)).unwrap();
        assert_eq!(t.leaf(&[0.4])[0], 1.0);
        assert_eq!(t.leaf(&[2.6])[0], 5.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn min_leaf_is_respected() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let y = [0u32, 1, 1, 1];
        let params = TreeParams {
            min_samples_leaf: 2,
            ..TreeParams::default()
        };
        let t = Tree::fit(&x, Target::Classes { y: &y, n_classes: 2 }, None, &params, &mut rng::seeded(0)).unwrap();
        assert_eq!(t.leaf(&[1.0]), &[0.5, 0.5]);
    }
}
