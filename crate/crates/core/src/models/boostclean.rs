//! BoostClean: AdaBoost over (imputer, model) pairs. Each round draws a
//! weighted resample of the training rows, trains one model per candidate
//! imputation and keeps the pair with the lowest weighted error.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Estimator, HyperParams, Matrix, Predictions, Preprocessor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::imputers::{fit as fit_imputer, FittedImputer, ImputerKind, ImputerSpec};
use crate::rng;

/// Weighted errors below this floor are clamped so α stays finite
/// (α ≈ 11.5).
pub const MIN_ERROR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub model: HyperParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostMember {
    pub candidate: usize,
    pub alpha: f64,
    pub error: f64,
    pub estimator: Estimator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostClean {
    pub imputers: Vec<FittedImputer>,
    pub preprocessors: Vec<Preprocessor>,
    pub members: Vec<BoostMember>,
    /// Weighted error of every candidate, per round run.
    pub round_errors: Vec<Vec<f64>>,
}

/// Index of the lowest weighted error below 0.5; ties go to the earlier
/// candidate.
pub fn select_candidate(errors: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &e) in errors.iter().enumerate() {
        if e < 0.5 && best.is_none_or(|b| e < errors[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn alpha(error: f64) -> f64 {
    let e = error.max(MIN_ERROR);
    0.5 * ((1.0 - e) / e).ln()
}

fn weighted_draw(weights: &[f64], n: usize, seed: u64) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let mut r = rng::seeded(seed);
    let mut idx: Vec<usize> = (0..n)
        .map(|_| {
            let u = r.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect();
    idx.sort_unstable();
    idx
}

/// Trains BoostClean on a training set with nulls. Every candidate imputer
/// is fit once on the full training set; `rounds` boosting rounds follow.
/// Stops early when no candidate reaches a weighted error below 0.5.
pub fn boostclean_train(train: &Dataset, candidates: &[ImputerSpec], params: &BoostParams, seed: u64) -> Result<BoostClean> {
    if candidates.is_empty() {
        return Err(Error::Config("boostclean needs at least one candidate imputer".into()));
    }
    if params.rounds == 0 {
        return Err(Error::Config("boostclean needs at least one round".into()));
    }
    if candidates.iter().any(|c| c.kind() == ImputerKind::Deletion) {
        return Err(Error::Config("deletion cannot impute test rows and is not a boostclean candidate".into()));
    }
    let y = train.labels();
    let n = train.n_rows();
    let mut imputers = Vec::new();
    let mut preprocessors = Vec::new();
    let mut matrices: Vec<Matrix> = Vec::new();
    for (i, spec) in candidates.iter().enumerate() {
        let f = fit_imputer(train, spec, rng::derive(seed, &[0, i as u64]))?;
        let done = f.transform(train)?.dataset;
        let p = Preprocessor::fit(&done)?;
        matrices.push(p.apply(&done)?);
        imputers.push(f);
        preprocessors.push(p);
    }
    let mut weights = vec![1.0 / n as f64; n];
    let mut members = Vec::new();
    let mut round_errors = Vec::new();
    for round in 0..params.rounds {
        let draw = weighted_draw(&weights, n, rng::derive(seed, &[1, round as u64]));
        let yd: Vec<u8> = draw.iter().map(|&r| y[r]).collect();
        let mut fitted = Vec::with_capacity(candidates.len());
        let mut errors = Vec::with_capacity(candidates.len());
        for x in &matrices {
            match Estimator::fit(&x.select_rows(&draw), &yd, &params.model, rng::derive(seed, &[2, round as u64])) {
                Ok(est) => {
                    let pred = est.predict(x).labels;
                    let e: f64 = (0..n).filter(|&r| pred[r] != y[r]).map(|r| weights[r]).sum();
                    errors.push(e);
                    fitted.push(Some((est, pred)));
                }
                // A single-class resample cannot train this round.
                Err(Error::Training(_)) => {
                    errors.push(f64::INFINITY);
                    fitted.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        round_errors.push(errors.clone());
        let Some(best) = select_candidate(&errors) else { break };
        let (estimator, pred) = fitted.swap_remove(best).expect("selected candidate was trained");
        let a = alpha(errors[best]);
        for r in 0..n {
            let sign = if pred[r] != y[r] { 1.0 } else { -1.0 };
            weights[r] *= (sign * a).exp();
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        members.push(BoostMember {
            candidate: best,
            alpha: a,
            error: errors[best],
            estimator,
        });
    }
    if members.is_empty() {
        return Err(Error::Training("no boostclean candidate beat a weighted error of 0.5".into()));
    }
    Ok(BoostClean {
        imputers,
        preprocessors,
        members,
        round_errors,
    })
}

impl BoostClean {
    /// α-weighted vote; each member sees the test set imputed by its own
    /// fitted imputer. The score maps the vote from [−Σα, Σα] onto [0, 1].
    pub fn predict(&self, test: &Dataset) -> Result<Predictions> {
        let mut encoded: Vec<Option<Matrix>> = vec![None; self.imputers.len()];
        for m in &self.members {
            if encoded[m.candidate].is_none() {
                let done = self.imputers[m.candidate].transform(test)?.dataset;
                encoded[m.candidate] = Some(self.preprocessors[m.candidate].apply(&done)?);
            }
        }
        let total: f64 = self.members.iter().map(|m| m.alpha).sum();
        let mut vote = vec![0.0; test.n_rows()];
        for m in &self.members {
            let labels = m.estimator.predict(encoded[m.candidate].as_ref().unwrap()).labels;
            for (v, l) in vote.iter_mut().zip(labels) {
                *v += m.alpha * if l == 1 { 1.0 } else { -1.0 };
            }
        }
        let scores: Vec<f64> = vote.iter().map(|v| if total > 0.0 { (v / total + 1.0) / 2.0 } else { 0.5 }).collect();
        Ok(Predictions {
            labels: vote.iter().map(|&v| (v >= 0.0) as u8).collect(),
            scores,
        })
    }
}
