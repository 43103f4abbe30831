use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::pipeline::{Metrics, ResultRecord, Status, METRIC_NAMES};
use crate::error::{Error, Result};
use crate::injector::ScenarioId;
use crate::metrics::{reversed, spearman};

pub const GROUP_KEYS: [&str; 6] = ["dataset", "scenario", "train_rate", "test_rate", "imputer", "model"];

/// One scored test set with its grouping keys.
#[derive(Clone, Debug)]
pub struct Observation<'a> {
    pub keys: BTreeMap<&'static str, String>,
    pub metrics: &'a Metrics,
}

/// Flattens successful records into one observation per test report.
pub fn observations(records: &[ResultRecord]) -> Vec<Observation<'_>> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.status == Status::Ok) {
        for t in &r.reports {
            let s = &r.spec;
            let keys = BTreeMap::from([
                ("dataset", s.dataset.clone()),
                ("scenario", s.scenario.map_or("baseline".into(), |id| id.to_string())),
                ("train_rate", s.train_rate.to_string()),
                ("test_rate", t.test_rate.to_string()),
                ("imputer", s.imputer.as_ref().map_or("none".into(), |i| i.kind().as_str().into())),
                ("model", s.model.as_str().into()),
            ]);
            out.push(Observation { keys, metrics: &t.metrics });
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<String>,
    pub metric: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Median of the matching clean baselines (same dataset and model).
    pub baseline: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub group_by: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

fn summarize(values: &mut [f64]) -> (f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    (quantile(values, 0.5), quantile(values, 0.25), quantile(values, 0.75))
}

/// Median and quartiles of each metric per group. Undefined metric values
/// are left out; groups where a metric is never defined get no row.
pub fn aggregate_report(records: &[ResultRecord], group_by: &[&str], metrics: &[&str]) -> Result<Summary> {
    for k in group_by {
        if !GROUP_KEYS.contains(k) {
            return Err(Error::Config(format!("unknown grouping key `{k}`")));
        }
    }
    for m in metrics {
        if !METRIC_NAMES.contains(m) {
            return Err(Error::Config(format!("unknown metric `{m}`")));
        }
    }
    let obs = observations(records);
    let mut groups: BTreeMap<Vec<String>, Vec<&Observation>> = BTreeMap::new();
    for o in &obs {
        groups.entry(group_by.iter().map(|k| o.keys[k].clone()).collect()).or_default().push(o);
    }
    let baseline = |key: &[String], metric: &str| -> Option<f64> {
        let mut v: Vec<f64> = obs
            .iter()
            .filter(|o| o.keys["scenario"] == "baseline")
            .filter(|o| {
                group_by
                    .iter()
                    .zip(key)
                    .all(|(k, val)| !matches!(*k, "dataset" | "model") || o.keys[k] == *val)
            })
            .filter_map(|o| o.metrics.get(metric))
            .collect();
        (!v.is_empty()).then(|| summarize(&mut v).0)
    };
    let mut rows = Vec::new();
    for (key, members) in &groups {
        for &m in metrics {
            let mut v: Vec<f64> = members.iter().filter_map(|o| o.metrics.get(m)).collect();
            if v.is_empty() {
                continue;
            }
            let n = v.len();
            let (median, q1, q3) = summarize(&mut v);
            rows.push(SummaryRow {
                key: key.clone(),
                metric: m.into(),
                n,
                median,
                q1,
                q3,
                baseline: baseline(key, m),
            });
        }
    }
    Ok(Summary {
        group_by: group_by.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

fn num(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

impl Summary {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.group_by.clone();
        header.extend(["metric", "n", "median", "q1", "q3", "baseline_median", "delta"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut line = r.key.clone();
            line.extend([
                r.metric.clone(),
                r.n.to_string(),
                r.median.to_string(),
                r.q1.to_string(),
                r.q3.to_string(),
                num(r.baseline),
                num(r.baseline.map(|b| r.median - b)),
            ]);
            w.write_record(&line)?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Evaluation(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn only(records: &[ResultRecord], keep: impl Fn(Option<ScenarioId>) -> bool) -> Vec<ResultRecord> {
    records.iter().filter(|r| keep(r.spec.scenario)).cloned().collect()
}

/// Writes the standard report tables into `dir` and returns their paths.
pub fn write_report(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    use ScenarioId::*;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let same = |s: Option<ScenarioId>| matches!(s, None | Some(S1 | S2 | S3 | S10));
    let shift = |s: Option<ScenarioId>| matches!(s, Some(S4 | S5 | S6 | S7 | S8 | S9));
    let by_mech = ["dataset", "scenario", "imputer", "model"];
    let tables: Vec<(&str, Vec<ResultRecord>, Vec<&str>, Vec<&str>)> = vec![
        ("summary.csv", records.to_vec(), GROUP_KEYS.to_vec(), METRIC_NAMES.to_vec()),
        ("correctness_by_mechanism.csv", only(records, same), by_mech.to_vec(), vec!["f1", "accuracy"]),
        (
            "fairness_by_mechanism.csv",
            only(records, same),
            by_mech.to_vec(),
            vec!["tprd", "tnrd", "srd", "di", "label_stability"],
        ),
        (
            "shift_scenarios.csv",
            only(records, shift),
            by_mech.to_vec(),
            vec!["f1", "accuracy", "tprd", "tnrd", "label_stability"],
        ),
        (
            "test_rate_sweep.csv",
            only(records, |s| s.is_some()),
            vec!["dataset", "scenario", "test_rate", "imputer", "model"],
            vec!["f1", "tprd", "tnrd", "label_stability"],
        ),
        (
            "imputation_quality.csv",
            only(records, |s| s.is_some()),
            vec!["dataset", "scenario", "imputer"],
            vec!["rmse_imp", "f1_imp", "kl_imp_cols", "kl_full", "rmse_diff", "f1_diff", "kl_diff"],
        ),
    ];
    let mut paths = Vec::new();
    for (name, recs, keys, metrics) in tables {
        let path = dir.join(name);
        let csv = aggregate_report(&recs, &keys, &metrics)?.to_csv()?;
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Spearman correlation matrix over imputer and model indicators and the
/// given metrics. TPRD and TNRD enter as `1 − |v|` so that larger means
/// fairer, under the names `tprd_reversed` / `tnrd_reversed`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub variables: Vec<String>,
    /// `None` where fewer than three paired values exist or a side is
    /// constant.
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn correlate(records: &[ResultRecord], metrics: &[&str]) -> Result<CorrelationTable> {
    for m in metrics {
        if !METRIC_NAMES.contains(m) {
            return Err(Error::Config(format!("unknown metric `{m}`")));
        }
    }
    let obs: Vec<Observation> = observations(records)
        .into_iter()
        .filter(|o| o.keys["scenario"] != "baseline")
        .collect();
    let imputers: BTreeSet<&str> = obs.iter().map(|o| o.keys["imputer"].as_str()).collect();
    let models: BTreeSet<&str> = obs.iter().map(|o| o.keys["model"].as_str()).collect();
    let mut variables = Vec::new();
    let mut columns: Vec<Vec<Option<f64>>> = Vec::new();
    for (key, levels) in [("imputer", &imputers), ("model", &models)] {
        for level in levels.iter() {
            variables.push(format!("{key}={level}"));
            columns.push(obs.iter().map(|o| Some((o.keys[key] == *level) as u8 as f64)).collect());
        }
    }
    for &m in metrics {
        let flip = matches!(m, "tprd" | "tnrd");
        variables.push(if flip { format!("{m}_reversed") } else { m.to_owned() });
        columns.push(
            obs.iter()
                .map(|o| o.metrics.get(m).map(|v| if flip { reversed(v) } else { v }))
                .collect(),
        );
    }
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let (a, b): (Vec<f64>, Vec<f64>) = columns[i]
                .iter()
                .zip(&columns[j])
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            let rho = if a.len() < 3 { None } else { spearman(&a, &b)? };
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(CorrelationTable { variables, values })
}

impl CorrelationTable {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        self.values[i][j]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.variables.iter().zip(&self.values) {
            let mut line = vec![name.clone()];
            line.extend(row.iter().map(|v| num(*v)));
            w.write_record(&line)?;
        }
        csv_string(w)
    }
}
