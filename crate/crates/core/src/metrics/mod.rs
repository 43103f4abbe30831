//! Imputation quality, imputation fairness, model correctness, model
//! fairness, label stability and rank correlation.

mod kde;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, Dataset, Group, NullMask};
use crate::error::{Error, Result};

pub use kde::{kl_numerical, scott_bandwidth, KDE_FLOOR, KDE_GRID};

pub const KL_EPSILON: f64 = 1e-9;

pub fn rmse(truth: &[f64], imputed: &[f64]) -> Result<f64> {
    if truth.len() != imputed.len() || truth.is_empty() {
        return Err(Error::Evaluation(format!("rmse over {} vs {} values", truth.len(), imputed.len())));
    }
    let sse: f64 = truth.iter().zip(imputed).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Macro-averaged F1 over the classes present in either input.
pub fn macro_f1<T: Eq + Hash + Ord + Clone>(truth: &[T], pred: &[T]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Evaluation(format!("f1 over {} vs {} values", truth.len(), pred.len())));
    }
    let classes: BTreeSet<&T> = truth.iter().chain(pred).collect();
    let mut total = 0.0;
    for c in &classes {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (t, p) in truth.iter().zip(pred) {
            match (t == *c, p == *c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        total += if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
    }
    Ok(total / classes.len() as f64)
}

/// KL(P‖Q) of the empirical label distributions, with ε-smoothing over the
/// union of observed labels.
pub fn kl_categorical<T: Eq + Hash + Ord + Clone>(truth: &[T], imputed: &[T]) -> Result<f64> {
    if truth.is_empty() || imputed.is_empty() {
        return Err(Error::Evaluation("categorical KL needs non-empty columns".into()));
    }
    let labels: BTreeSet<&T> = truth.iter().chain(imputed).collect();
    let dist = |v: &[T]| -> Vec<f64> {
        let mut counts: HashMap<&T, usize> = HashMap::new();
        for x in v {
            *counts.entry(x).or_default() += 1;
        }
        let raw: Vec<f64> = labels.iter().map(|l| counts.get(*l).copied().unwrap_or(0) as f64 / v.len() as f64 + KL_EPSILON).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    let p = dist(truth);
    let q = dist(imputed);
    Ok(p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum())
}

/// KL(P‖Q) for probability vectors given directly, smoothed as above.
pub fn kl_distributions(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Evaluation("distributions differ in support".into()));
    }
    let norm = |v: &[f64]| -> Vec<f64> {
        let raw: Vec<f64> = v.iter().map(|x| x + KL_EPSILON).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    let (p, q) = (norm(p), norm(q));
    Ok(p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum())
}

/// Imputation quality of one dataset against its ground truth. Maps are
/// keyed by column name; columns without injected cells are omitted from
/// the masked-cell metrics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationQuality {
    pub rmse: BTreeMap<String, f64>,
    pub f1: BTreeMap<String, f64>,
    /// Whole-column KL for the injected columns.
    pub kl: BTreeMap<String, f64>,
    /// Whole-column KL for every column where it is defined.
    pub kl_full_columns: BTreeMap<String, f64>,
    pub rmse_imp: Option<f64>,
    pub f1_imp: Option<f64>,
    pub kl_imp_cols: Option<f64>,
    pub kl_full: Option<f64>,
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn numbers(d: &Dataset, rows: &[usize], j: usize) -> Vec<f64> {
    rows.iter()
        .filter_map(|&r| match d.cell(r, j) {
            crate::dataset::Cell::Num(x) => Some(x),
            _ => None,
        })
        .collect()
}

fn labels<'a>(d: &'a Dataset, rows: &[usize], j: usize) -> Vec<&'a str> {
    rows.iter().filter_map(|&r| crate::imputers::label_of(d, r, j)).collect()
}

/// Scores `imputed` against `truth` (row-aligned, same columns). `injected`
/// marks the cells that were erased and imputed.
pub fn imputation_quality(truth: &Dataset, imputed: &Dataset, injected: &NullMask) -> Result<ImputationQuality> {
    let rows: Vec<usize> = (0..truth.n_rows()).collect();
    imputation_quality_rows(truth, imputed, injected, &rows)
}

/// As [`imputation_quality`], restricted to `rows`.
pub fn imputation_quality_rows(truth: &Dataset, imputed: &Dataset, injected: &NullMask, rows: &[usize]) -> Result<ImputationQuality> {
    if truth.n_rows() != imputed.n_rows() || truth.n_cols() != imputed.n_cols() || injected.shape() != (truth.n_rows(), truth.n_cols()) {
        return Err(Error::Evaluation("truth, imputed data and mask are not aligned".into()));
    }
    let mut q = ImputationQuality::default();
    for j in 0..truth.n_cols() {
        let name = truth.column_schema(j).name.clone();
        let masked: Vec<usize> = rows.iter().copied().filter(|&r| injected.get(r, j)).collect();
        // Rows where the truth is known form the whole-column comparison.
        let known: Vec<usize> = rows.iter().copied().filter(|&r| !truth.is_null(r, j)).collect();
        let kl = match truth.column_schema(j).kind {
            ColumnKind::Numerical => {
                if !masked.is_empty() {
                    q.rmse.insert(name.clone(), rmse(&numbers(truth, &masked, j), &numbers(imputed, &masked, j))?);
                }
                match kl_numerical(&numbers(truth, &known, j), &numbers(imputed, &known, j)) {
                    Ok(v) => Some(v),
                    Err(Error::Degenerate(_)) | Err(Error::Evaluation(_)) => None,
                    Err(e) => return Err(e),
                }
            }
            ColumnKind::Categorical => {
                if !masked.is_empty() {
                    q.f1.insert(name.clone(), macro_f1(&labels(truth, &masked, j), &labels(imputed, &masked, j))?);
                }
                let (t, i) = (labels(truth, &known, j), labels(imputed, &known, j));
                if t.is_empty() {
                    None
                } else {
                    Some(kl_categorical(&t, &i)?)
                }
            }
        };
        if let Some(kl) = kl {
            if !masked.is_empty() {
                q.kl.insert(name.clone(), kl);
            }
            q.kl_full_columns.insert(name, kl);
        }
    }
    q.rmse_imp = mean(q.rmse.values().copied());
    q.f1_imp = mean(q.f1.values().copied());
    q.kl_imp_cols = mean(q.kl.values().copied());
    q.kl_full = mean(q.kl_full_columns.values().copied());
    Ok(q)
}

/// priv − dis differences of the aggregate imputation-quality metrics;
/// `None` where either group lacks the metric.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationFairness {
    pub f1_diff: Option<f64>,
    pub rmse_diff: Option<f64>,
    pub kl_diff: Option<f64>,
}

pub fn imputation_fairness(truth: &Dataset, imputed: &Dataset, injected: &NullMask, groups: &[Group]) -> Result<ImputationFairness> {
    if groups.len() != truth.n_rows() {
        return Err(Error::Evaluation("group vector does not match the rows".into()));
    }
    let rows_of = |g: Group| -> Vec<usize> { (0..groups.len()).filter(|&r| groups[r] == g).collect() };
    let (pr, dr) = (rows_of(Group::Priv), rows_of(Group::Dis));
    if pr.is_empty() || dr.is_empty() {
        return Ok(ImputationFairness::default());
    }
    let p = imputation_quality_rows(truth, imputed, injected, &pr)?;
    let d = imputation_quality_rows(truth, imputed, injected, &dr)?;
    Ok(fairness_from(&p, &d))
}

pub fn fairness_from(privileged: &ImputationQuality, disadvantaged: &ImputationQuality) -> ImputationFairness {
    let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    ImputationFairness {
        f1_diff: diff(privileged.f1_imp, disadvantaged.f1_imp),
        rmse_diff: diff(privileged.rmse_imp, disadvantaged.rmse_imp),
        kl_diff: diff(privileged.kl_imp_cols, disadvantaged.kl_imp_cols),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(truth: &[u8], pred: &[u8]) -> ConfusionCounts {
        let mut c = ConfusionCounts::default();
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == 1, p == 1) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn selection_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.n())
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub f1: f64,
    pub accuracy: f64,
    /// False when there were no actual and no predicted positives, so F1
    /// was set to 0 by convention.
    pub f1_defined: bool,
}

pub fn model_scores(truth: &[u8], pred: &[u8]) -> Result<ModelScores> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Evaluation(format!("{} labels vs {} predictions", truth.len(), pred.len())));
    }
    let c = ConfusionCounts::from_labels(truth, pred);
    let denom = 2 * c.tp + c.fp + c.fn_;
    Ok(ModelScores {
        f1: if denom == 0 { 0.0 } else { 2.0 * c.tp as f64 / denom as f64 },
        accuracy: (c.tp + c.tn) as f64 / c.n() as f64,
        f1_defined: denom > 0,
    })
}

/// dis − priv rate differences and the dis/priv selection-rate ratio;
/// `None` marks an undefined metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FairnessScores {
    pub tprd: Option<f64>,
    pub tnrd: Option<f64>,
    pub srd: Option<f64>,
    pub di: Option<f64>,
}

pub fn fairness_from_counts(privileged: &ConfusionCounts, disadvantaged: &ConfusionCounts) -> FairnessScores {
    if privileged.n() == 0 || disadvantaged.n() == 0 {
        return FairnessScores::default();
    }
    let diff = |d: Option<f64>, p: Option<f64>| Some(d? - p?);
    let (sd, sp) = (disadvantaged.selection_rate(), privileged.selection_rate());
    FairnessScores {
        tprd: diff(disadvantaged.tpr(), privileged.tpr()),
        tnrd: diff(disadvantaged.tnr(), privileged.tnr()),
        srd: diff(sd, sp),
        di: match (sd, sp) {
            (Some(d), Some(p)) if p > 0.0 => Some(d / p),
            _ => None,
        },
    }
}

pub fn fairness_scores(truth: &[u8], pred: &[u8], groups: &[Group]) -> Result<FairnessScores> {
    if truth.len() != pred.len() || truth.len() != groups.len() {
        return Err(Error::Evaluation("labels, predictions and groups differ in length".into()));
    }
    let mut counts = [ConfusionCounts::default(); 2];
    for i in 0..truth.len() {
        let c = &mut counts[(groups[i] == Group::Dis) as usize];
        match (truth[i] == 1, pred[i] == 1) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(fairness_from_counts(&counts[0], &counts[1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_sample: Vec<f64>,
    pub mean: f64,
}

/// `|B₊ − B₋| / B` per column of a `B × N` binary prediction matrix.
pub fn label_stability(predictions: &[Vec<u8>]) -> Result<StabilityReport> {
    let b = predictions.len();
    if b == 0 {
        return Err(Error::Evaluation("label stability needs at least one ensemble member".into()));
    }
    let n = predictions[0].len();
    if predictions.iter().any(|row| row.len() != n) {
        return Err(Error::Evaluation("ragged prediction matrix".into()));
    }
    let per_sample: Vec<f64> = (0..n)
        .map(|i| {
            let pos = predictions.iter().filter(|row| row[i] == 1).count() as f64;
            (pos - (b as f64 - pos)).abs() / b as f64
        })
        .collect();
    let mean = if n == 0 { 0.0 } else { per_sample.iter().sum::<f64>() / n as f64 };
    Ok(StabilityReport { per_sample, mean })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ; `Ok(None)` when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Evaluation(format!("spearman over {} vs {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Evaluation(format!("spearman needs at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("spearman inputs must be finite".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// `1 − |v|`, used so that larger means fairer for TPRD and TNRD.
pub fn reversed(v: f64) -> f64 {
    1.0 - v.abs()
}
