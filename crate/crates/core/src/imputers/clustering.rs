//! k-prototypes: squared Euclidean distance on standardized numericals plus
//! γ-weighted mismatch count on categoricals.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{completed, label_of, mode_code, write_fill, Fill, FillSource, FilledCell, FittedImputer, ImputationResult, ImputerParams, ImputerSpec};
use crate::dataset::{Cell, ColumnKind, Dataset};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub gamma: f64,
    pub cost: f64,
    /// `(mean, std)` of each numerical column over complete cases; `None`
    /// for categoricals.
    pub scaling: Vec<Option<(f64, f64)>>,
    /// Per-cluster fill values in original units (numerical means and
    /// categorical modes of the cluster's members).
    pub centers: Vec<Vec<Fill>>,
    pub sizes: Vec<usize>,
}

/// Default cluster count for `n` complete rows.
pub fn default_k(n: usize) -> usize {
    ((n as f64 / 2.0).sqrt().round() as usize).max(2)
}

enum Val {
    Num(f64),
    Cat(u32),
}

struct Points {
    rows: Vec<Vec<Val>>,
    gamma: f64,
}

impl Points {
    fn dist(&self, a: &[Val], center: &[Val]) -> f64 {
        let mut d = 0.0;
        for (x, c) in a.iter().zip(center) {
            match (x, c) {
                (Val::Num(x), Val::Num(c)) => d += (x - c) * (x - c),
                (Val::Cat(x), Val::Cat(c)) if x != c => d += self.gamma,
                _ => {}
            }
        }
        d
    }
}

fn clone_vals(v: &[Val]) -> Vec<Val> {
    v.iter()
        .map(|x| match x {
            Val::Num(a) => Val::Num(*a),
            Val::Cat(c) => Val::Cat(*c),
        })
        .collect()
}

struct Run {
    assign: Vec<usize>,
    cost: f64,
}

fn nearest(p: &Points, row: &[Val], centers: &[Vec<Val>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = p.dist(row, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn run_once(p: &Points, k: usize, n_cats: &[usize], max_iter: usize, seed: u64) -> Run {
    let n = p.rows.len();
    let mut r = rng::seeded(seed);
    // k-means++ seeding.
    let mut centers: Vec<Vec<Val>> = vec![clone_vals(&p.rows[r.random_range(0..n)])];
    let mut d2: Vec<f64> = p.rows.iter().map(|x| p.dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = r.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            r.random_range(0..n)
        };
        centers.push(clone_vals(&p.rows[pick]));
        let last = centers.last().unwrap();
        for (i, x) in p.rows.iter().enumerate() {
            d2[i] = d2[i].min(p.dist(x, last));
        }
    }
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, x) in p.rows.iter().enumerate() {
            let (c, _) = nearest(p, x, &centers);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (ci, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == ci).collect();
            if members.is_empty() {
                continue;
            }
            for (j, slot) in center.iter_mut().enumerate() {
                match slot {
                    Val::Num(v) => {
                        *v = members
                            .iter()
                            .map(|&i| match p.rows[i][j] {
                                Val::Num(x) => x,
                                Val::Cat(_) => 0.0,
                            })
                            .sum::<f64>()
                            / members.len() as f64
                    }
                    Val::Cat(c) => {
                        let mut counts = vec![0usize; n_cats[j]];
                        for &i in &members {
                            if let Val::Cat(x) = p.rows[i][j] {
                                counts[x as usize] += 1;
                            }
                        }
                        *c = mode_code(&counts).unwrap_or(*c);
                    }
                }
            }
        }
    }
    let cost = p.rows.iter().zip(&assign).map(|(x, &c)| p.dist(x, &centers[c])).sum();
    Run { assign, cost }
}

/// Fits k-prototypes on the complete rows of `train`. `k = None` uses
/// [`default_k`]; the best of `restarts` seeded runs is kept.
pub fn fit_clustering(train: &Dataset, k: Option<usize>, seed: u64, max_iter: usize, restarts: usize) -> Result<FittedImputer> {
    let rows = train.complete_rows();
    if rows.is_empty() {
        return Err(Error::Unfittable("clustering needs at least one complete row".into()));
    }
    let k = k.unwrap_or_else(|| default_k(rows.len()).min(rows.len()));
    if k == 0 || k > rows.len() {
        return Err(Error::Unfittable(format!("k = {k} with {} complete rows", rows.len())));
    }
    if max_iter == 0 {
        return Err(Error::Config("clustering max_iter must be positive".into()));
    }
    let p = train.n_cols();
    let mut scaling = vec![None; p];
    let mut n_cats = vec![0usize; p];
    let mut variances = Vec::new();
    for (j, s) in scaling.iter_mut().enumerate() {
        match train.column_schema(j).kind {
            ColumnKind::Numerical => {
                let v: Vec<f64> = rows
                    .iter()
                    .map(|&r| match train.cell(r, j) {
                        Cell::Num(x) => x,
                        _ => unreachable!("complete row"),
                    })
                    .collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
                let std = var.sqrt();
                variances.push(if std < 1e-12 { 0.0 } else { 1.0 });
                *s = Some((mean, if std < 1e-12 { 1.0 } else { std }));
            }
            ColumnKind::Categorical => n_cats[j] = train.column_schema(j).category_list().len(),
        }
    }
    let gamma = if variances.is_empty() {
        0.5
    } else {
        0.5 * variances.iter().sum::<f64>() / variances.len() as f64
    };
    let points = Points {
        rows: rows
            .iter()
            .map(|&r| {
                (0..p)
                    .map(|j| match (train.cell(r, j), scaling[j]) {
                        (Cell::Num(x), Some((m, s))) => Val::Num((x - m) / s),
                        (Cell::Cat(c), _) => Val::Cat(c),
                        _ => unreachable!("complete row"),
                    })
                    .collect()
            })
            .collect(),
        gamma,
    };
    let mut best: Option<Run> = None;
    for restart in 0..restarts.max(1) {
        let run = run_once(&points, k, &n_cats, max_iter, rng::derive(seed, &[restart as u64]));
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    let best = best.unwrap();
    let mut centers = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    for ci in 0..k {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| best.assign[i] == ci).map(|i| rows[i]).collect();
        sizes.push(members.len());
        // Duplicate seed rows can leave a cluster empty.
        let members = if members.is_empty() { rows.clone() } else { members };
        let center = (0..p)
            .map(|j| match train.column_schema(j).kind {
                ColumnKind::Numerical => Fill::Num(
                    members
                        .iter()
                        .map(|&r| match train.cell(r, j) {
                            Cell::Num(x) => x,
                            _ => 0.0,
                        })
                        .sum::<f64>()
                        / members.len() as f64,
                ),
                ColumnKind::Categorical => {
                    let mut counts = vec![0usize; n_cats[j]];
                    for &r in &members {
                        if let Cell::Cat(c) = train.cell(r, j) {
                            counts[c as usize] += 1;
                        }
                    }
                    Fill::Cat(train.category_label(j, mode_code(&counts).unwrap_or(0)).to_owned())
                }
            })
            .collect();
        centers.push(center);
    }
    let model = ClusterModel {
        k,
        gamma,
        cost: best.cost,
        scaling,
        centers,
        sizes,
    };
    Ok(FittedImputer::new(
        ImputerSpec::Clustering {
            k: Some(k),
            max_iter,
            restarts,
        },
        seed,
        train,
        ImputerParams::Clustering(model),
    ))
}

impl ClusterModel {
    /// Nearest center using only the row's observed fields; ties go to the
    /// lower cluster index.
    pub fn assign(&self, d: &Dataset, row: usize) -> usize {
        let mut best = (0, f64::INFINITY);
        for (ci, center) in self.centers.iter().enumerate() {
            let mut dist = 0.0;
            for (j, fill) in center.iter().enumerate() {
                if d.is_null(row, j) {
                    continue;
                }
                match (fill, d.cell(row, j), self.scaling[j]) {
                    (Fill::Num(c), Cell::Num(x), Some((m, s))) => {
                        let z = (x - m) / s - (c - m) / s;
                        dist += z * z;
                    }
                    (Fill::Cat(c), _, _) => {
                        if label_of(d, row, j) != Some(c.as_str()) {
                            dist += self.gamma;
                        }
                    }
                    _ => {}
                }
            }
            if dist < best.1 {
                best = (ci, dist);
            }
        }
        best.0
    }

    pub(super) fn transform(&self, d: &Dataset) -> Result<ImputationResult> {
        let mut out = d.clone();
        let mut filled = Vec::new();
        for r in 0..d.n_rows() {
            if !d.mask().row_has_any(r) {
                continue;
            }
            let ci = self.assign(d, r);
            for j in 0..d.n_cols() {
                if d.is_null(r, j) {
                    write_fill(&mut out, r, j, &self.centers[ci][j])?;
                    filled.push(FilledCell {
                        row: r,
                        column: j,
                        source: FillSource::Cluster(ci),
                    });
                }
            }
        }
        Ok(completed(out, filled))
    }
}
