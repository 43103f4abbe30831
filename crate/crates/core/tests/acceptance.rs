//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Set `NULLBENCH_DIABETES_SCHEMA` to a schema config pointing at the real
//! diabetes CSV to include its demographics check.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use nullbench_core::controller::{self, RunConfig, RunOptions, ResultStore, Status};
use nullbench_core::dataset::{demographics, DatasetConfig, Group, GroupSpec, Predicate};
use nullbench_core::imputers::{self, fit_clustering, fit_miss_forest, ImputerOptions, ImputerParams};
use nullbench_core::injector::{inject, preset, InjectionRule, Mechanism, MissingnessSpec};
use nullbench_core::metrics::{self, kl_numerical};
use nullbench_core::rng::seeded;
use nullbench_core::{Cell, Dataset, ImputerKind};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn rate(d: &nullbench_core::dataset::NullMask, col: usize, rows: &[usize]) -> f64 {
    rows.iter().filter(|&&r| d.get(r, col)).count() as f64 / rows.len() as f64
}

// 1 ------------------------------------------------------------------------

fn injection_rates() -> Check {
    let start = Instant::now();
    let mut rng = seeded(1);
    let n = 100_000;
    let d = Dataset::builder()
        .numerical("a", (0..n).map(|_| Some(rng.random::<f64>())))
        .numerical("b", (0..n).map(|_| Some(rng.random::<f64>())))
        .categorical("c", ["x", "y"], (0..n).map(|i| Some(if i % 2 == 0 { "x" } else { "y" })))
        .target("t", ["no", "yes"], (0..n).map(|i| (i % 3 == 0) as u8))
        .build()
        .map_err(|e| e.to_string())?;
    let spec = MissingnessSpec::new(vec![InjectionRule::mcar(["a", "b", "c"], 0.3)], 0.3).map_err(|e| e.to_string())?;
    let inj = inject(&d, &spec, 11).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for j in 0..3 {
        let r = rate(&inj.injected, j, &all);
        ensure((0.2956..=0.3044).contains(&r), format!("MCAR column {j} rate {r:.4}"))?;
        out.push(format!("{r:.4}"));
    }

    let diabetes = preset("diabetes").map_err(|e| e.to_string())?;
    let mar_rule = diabetes
        .rules
        .rules
        .iter()
        .find(|r| r.mechanism == Mechanism::Mar && r.conditional_column.as_deref() == Some("Sex"))
        .cloned()
        .ok_or("no MAR rule on Sex in the diabetes preset")?;
    let mnar_rule = diabetes
        .rules
        .rules
        .iter()
        .find(|r| r.mechanism == Mechanism::Mnar && r.conditional_column.as_deref() == Some("SoundSleep"))
        .cloned()
        .ok_or("no MNAR rule on SoundSleep in the diabetes preset")?;
    let n = 50_000;
    let yes_no = ["yes", "no"];
    let d = Dataset::builder()
        .sensitive_categorical("Sex", ["male", "female"], (0..n).map(|i| Some(if i % 2 == 0 { "female" } else { "male" })))
        .categorical("Family_Diabetes", yes_no, (0..n).map(|_| Some(yes_no[rng.random_range(0..2)])))
        .categorical("RegularMedicine", yes_no, (0..n).map(|_| Some(yes_no[rng.random_range(0..2)])))
        .numerical("SoundSleep", (0..n).map(|_| Some(rng.random_range(0..11) as f64)))
        .target("t", ["no", "yes"], (0..n).map(|i| (i % 3 == 0) as u8))
        .build()
        .map_err(|e| e.to_string())?;
    let (p_dis, p_priv) = (mar_rule.p_dis, mar_rule.p_priv);
    let inj = inject(&d, &MissingnessSpec::new(vec![mar_rule], 0.3).map_err(|e| e.to_string())?, 12).map_err(|e| e.to_string())?;
    let female: Vec<usize> = (0..n).filter(|i| i % 2 == 0).collect();
    let male: Vec<usize> = (0..n).filter(|i| i % 2 == 1).collect();
    for col in [1, 2] {
        let (f, m) = (rate(&inj.injected, col, &female), rate(&inj.injected, col, &male));
        ensure((f - p_dis).abs() <= 0.01 && (m - p_priv).abs() <= 0.01, format!("MAR column {col}: female {f:.4}, male {m:.4}"))?;
        out.push(format!("MAR {f:.3}/{m:.3}"));
    }
    let (p_dis, p_priv) = (mnar_rule.p_dis, mnar_rule.p_priv);
    let inj = inject(&d, &MissingnessSpec::new(vec![mnar_rule], 0.3).map_err(|e| e.to_string())?, 13).map_err(|e| e.to_string())?;
    let low: Vec<usize> = (0..n).filter(|&r| matches!(d.cell(r, 3), Cell::Num(x) if x < 5.0)).collect();
    let high: Vec<usize> = (0..n).filter(|&r| matches!(d.cell(r, 3), Cell::Num(x) if x >= 5.0)).collect();
    let (l, h) = (rate(&inj.injected, 3, &low), rate(&inj.injected, 3, &high));
    ensure((l - p_dis).abs() <= 0.01 && (h - p_priv).abs() <= 0.01, format!("MNAR: dis {l:.4}, priv {h:.4}"))?;
    out.push(format!("MNAR {l:.3}/{h:.3}"));
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!("MCAR {} | {} | {secs:.1}s", out[..3].join(" "), out[3..].join(" ")))
}

// 2 ------------------------------------------------------------------------

/// Largest standardized gap in a column's injection rate between the two
/// halves defined by each splitter.
fn max_gap(mask: &nullbench_core::dataset::NullMask, col: usize, splits: &[(String, Vec<bool>)]) -> (String, f64) {
    let mut worst = (String::new(), 0.0);
    for (name, side) in splits {
        let a: Vec<usize> = (0..side.len()).filter(|&r| side[r]).collect();
        let b: Vec<usize> = (0..side.len()).filter(|&r| !side[r]).collect();
        let (ra, rb) = (rate(mask, col, &a), rate(mask, col, &b));
        let p = (ra * a.len() as f64 + rb * b.len() as f64) / side.len() as f64;
        let sigma = (p * (1.0 - p) * (1.0 / a.len() as f64 + 1.0 / b.len() as f64)).sqrt();
        let z = (ra - rb).abs() / sigma;
        if z > worst.1 {
            worst = (name.clone(), z);
        }
    }
    worst
}

fn mechanism_semantics() -> Check {
    let mut rng = seeded(2);
    let n = 50_000;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let f1: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let f2: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let g: Vec<&str> = (0..n).map(|_| ["p", "q", "r"][rng.random_range(0..3)]).collect();
    let sex: Vec<&str> = (0..n).map(|_| if rng.random::<bool>() { "female" } else { "male" }).collect();
    let d = Dataset::builder()
        .numerical("f1", f1.iter().map(|&x| Some(x)))
        .numerical("f2", f2.iter().map(|&x| Some(x)))
        .categorical("g", ["p", "q", "r"], g.iter().map(|&x| Some(x)))
        .sensitive_categorical("sex", ["male", "female"], sex.iter().map(|&x| Some(x)))
        .target("t", ["no", "yes"], (0..n).map(|_| rng.random::<bool>() as u8))
        .build()
        .map_err(|e| e.to_string())?;
    let median = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    let (m1, m2) = (median(&f1), median(&f2));
    let split_f1 = ("f1".to_string(), f1.iter().map(|&x| x < m1).collect::<Vec<_>>());
    let split_f2 = ("f2".to_string(), f2.iter().map(|&x| x < m2).collect::<Vec<_>>());
    let split_g = ("g".to_string(), g.iter().map(|&x| x == "p").collect::<Vec<_>>());
    let split_sex = ("sex".to_string(), sex.iter().map(|&x| x == "female").collect::<Vec<_>>());
    let label = ("target".to_string(), d.labels().iter().map(|&y| y == 1).collect::<Vec<_>>());

    let mcar = MissingnessSpec::new(vec![InjectionRule::mcar(["f1", "f2", "g"], 0.3)], 0.3).map_err(|e| e.to_string())?;
    let inj = inject(&d, &mcar, 21).map_err(|e| e.to_string())?;
    let every = [split_f1.clone(), split_f2.clone(), split_g.clone(), split_sex.clone(), label.clone()];
    let mut worst_mcar: (String, f64) = (String::new(), 0.0);
    for col in 0..3 {
        let w = max_gap(&inj.injected, col, &every);
        if w.1 > worst_mcar.1 {
            worst_mcar = w;
        }
    }
    ensure(worst_mcar.1 < 3.0, format!("MCAR mask depends on {} (z = {:.2})", worst_mcar.0, worst_mcar.1))?;

    let mar = MissingnessSpec::new(
        vec![InjectionRule::mar(["f1", "f2"], "sex", Predicate::one_of(["female"]), 0.4, 0.2)],
        0.3,
    )
    .map_err(|e| e.to_string())?;
    let inj = inject(&d, &mar, 22).map_err(|e| e.to_string())?;
    let others = [split_f1, split_f2, split_g, label];
    let mut worst_mar: (String, f64) = (String::new(), 0.0);
    for col in 0..2 {
        let w = max_gap(&inj.injected, col, &others);
        if w.1 > worst_mar.1 {
            worst_mar = w;
        }
    }
    ensure(worst_mar.1 < 3.0, format!("MAR mask depends on {} (z = {:.2})", worst_mar.0, worst_mar.1))?;
    let on_sex = max_gap(&inj.injected, 0, &[split_sex]).1;
    ensure(on_sex > 3.0, format!("MAR mask does not depend on its conditional column (z = {on_sex:.2})"))?;
    Ok(format!(
        "max |z| MCAR {:.2}, MAR off-condition {:.2}, MAR on sex {on_sex:.1}",
        worst_mcar.1, worst_mar.1
    ))
}

// 3 ------------------------------------------------------------------------

fn mixed_data(n: usize, rng: &mut impl Rng, null_rate: f64) -> Dataset {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    Dataset::builder()
        .numerical("x", x.iter().map(|&v| Some(v)))
        .numerical("z", x.iter().map(|&v| if rng.random::<f64>() < null_rate { None } else { Some(2.0 * v + rng.random::<f64>()) }))
        .categorical(
            "c",
            ["lo", "mid", "hi"],
            x.iter().map(|&v| if rng.random::<f64>() < null_rate { None } else { Some(["lo", "mid", "hi"][(v / 3.4) as usize]) }),
        )
        .target("t", ["no", "yes"], x.iter().map(|&v| (v > 5.0) as u8))
        .build()
        .unwrap()
}

fn leakage_guard() -> Check {
    let mut rng = seeded(3);
    let train = mixed_data(300, &mut rng, 0.25);
    let test_a = mixed_data(120, &mut rng, 0.3);
    // Same masks, different observed values.
    let mut test_b = test_a.clone();
    for r in 0..test_b.n_rows() {
        if !test_b.is_null(r, 1) {
            test_b.set_cell(r, 1, Cell::Num(rng.random_range(-50.0..50.0))).unwrap();
        }
        if !test_b.is_null(r, 2) {
            test_b.set_cell(r, 2, Cell::Cat(rng.random_range(0..3))).unwrap();
        }
    }
    let options = ImputerOptions {
        forest_trees: 20,
        ..ImputerOptions::default()
    };
    for kind in ImputerKind::ALL {
        let spec = options.spec(kind);
        let fitted = imputers::fit(&train, &spec, 7).map_err(|e| e.to_string())?;
        let before = fitted.to_json().map_err(|e| e.to_string())?;
        let a = fitted.transform(&test_a).map_err(|e| e.to_string())?;
        let after_a = fitted.to_json().map_err(|e| e.to_string())?;
        let b = fitted.transform(&test_b).map_err(|e| e.to_string())?;
        let after_b = fitted.to_json().map_err(|e| e.to_string())?;
        let refit = imputers::fit(&train, &spec, 7).map_err(|e| e.to_string())?.to_json().map_err(|e| e.to_string())?;
        ensure(before == after_a && before == after_b && before == refit, format!("{}: serialized imputer changed", kind.as_str()))?;
        if matches!(kind, ImputerKind::MedianMode | ImputerKind::MedianDummy) {
            for cell in &a.filled {
                let (fa, fb) = (a.dataset.cell_text(cell.row, cell.column), b.dataset.cell_text(cell.row, cell.column));
                ensure(fa == fb, format!("{}: fill at ({}, {}) differs: {fa:?} vs {fb:?}", kind.as_str(), cell.row, cell.column))?;
            }
            ensure(a.filled == b.filled, format!("{}: filled cells differ", kind.as_str()))?;
        }
        if kind == ImputerKind::Deletion {
            ensure(a.retained_rows == b.retained_rows, "deletion kept different rows")?;
        }
    }
    Ok("5 imputer kinds: serialization unchanged; statistical fills identical".into())
}

// 4 ------------------------------------------------------------------------

const SMALL_RUN: &str = r#"
scenarios = ["S1", "S3", "S10"]
imputers = ["deletion", "median-mode", "median-dummy", "clustering", "miss-forest"]
models = ["dt", "lr"]
seeds = [5, 6]
bootstrap_members = 5

[imputer_options]
forest_trees = 10
forest_max_iter = 3

[[datasets]]
config = "german.toml"

[grids.decision-tree]
max_depth = [3, 5]
min_samples_leaf = [5]
criterion = ["gini"]

[grids.logistic-regression]
penalty = ["l2"]
c = [0.1, 1.0]
"#;

fn determinism() -> Check {
    let cfg = RunConfig::from_toml(SMALL_RUN, fixtures()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, workers: usize, cache: &str| -> Result<(controller::RunSummary, String), String> {
        let mut opts = RunOptions::new(dir.path().join(name));
        opts.workers = workers;
        opts.cache_dir = Some(dir.path().join(cache));
        let summary = controller::run(&cfg, &opts).map_err(|e| e.to_string())?;
        let store = ResultStore::open(&opts.results).map_err(|e| e.to_string())?;
        Ok((summary, store.sorted_lines().join("\n")))
    };
    let (serial, a) = run("serial.jsonl", 1, "cache-a")?;
    let (_, b) = run("parallel.jsonl", 8, "cache-b")?;
    let (warm, c) = run("warm.jsonl", 8, "cache-a")?;
    ensure(serial.failed == 0, format!("{} pipelines failed", serial.failed))?;
    ensure(a == b, "serial and 8-worker stores differ")?;
    ensure(a == c, "cold and cache-warm stores differ")?;
    ensure(warm.cache_hits == warm.executed - 4, format!("{} of {} warm pipelines hit the cache", warm.cache_hits, warm.executed))?;
    Ok(format!(
        "{} pipelines; serial, 8 workers and cache-warm stores byte-identical ({} warm hits)",
        serial.planned, warm.cache_hits
    ))
}

// 5 ------------------------------------------------------------------------

fn brute_rates(truth: &[u8], pred: &[u8], groups: &[Group], g: Group) -> [Option<f64>; 3] {
    let idx: Vec<usize> = (0..truth.len()).filter(|&i| groups[i] == g).collect();
    let frac = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    let pos: Vec<&usize> = idx.iter().filter(|&&i| truth[i] == 1).collect();
    let neg: Vec<&usize> = idx.iter().filter(|&&i| truth[i] == 0).collect();
    [
        frac(pos.iter().filter(|&&&i| pred[i] == 1).count(), pos.len()),
        frac(neg.iter().filter(|&&&i| pred[i] == 0).count(), neg.len()),
        frac(idx.iter().filter(|&&i| pred[i] == 1).count(), idx.len()),
    ]
}

fn metric_oracles() -> Check {
    let mut rng = seeded(5);
    for case in 0..200 {
        let n = rng.random_range(1..=50);
        let truth: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let pred: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let groups: Vec<Group> = (0..n).map(|_| if rng.random::<bool>() { Group::Dis } else { Group::Priv }).collect();
        let got = metrics::fairness_scores(&truth, &pred, &groups).map_err(|e| e.to_string())?;
        let d = brute_rates(&truth, &pred, &groups, Group::Dis);
        let p = brute_rates(&truth, &pred, &groups, Group::Priv);
        let both = groups.contains(&Group::Dis) && groups.contains(&Group::Priv);
        let diff = |a: Option<f64>, b: Option<f64>| if both { Some(a? - b?) } else { None };
        let di = match (d[2], p[2]) {
            (Some(a), Some(b)) if both && b > 0.0 => Some(a / b),
            _ => None,
        };
        ensure(
            got.tprd == diff(d[0], p[0]) && got.tnrd == diff(d[1], p[1]) && got.srd == diff(d[2], p[2]) && got.di == di,
            format!("fairness mismatch on case {case}: {got:?}"),
        )?;

        let b = rng.random_range(1..=12);
        let matrix: Vec<Vec<u8>> = (0..b).map(|_| (0..n).map(|_| rng.random_range(0..2)).collect()).collect();
        let report = metrics::label_stability(&matrix).map_err(|e| e.to_string())?;
        for i in 0..n {
            let plus = (0..b).filter(|&m| matrix[m][i] == 1).count() as f64;
            let minus = b as f64 - plus;
            ensure(report.per_sample[i] == (plus - minus).abs() / b as f64, format!("stability mismatch on case {case}"))?;
        }
    }

    let p: Vec<f64> = {
        let raw: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    };
    let self_kl = metrics::kl_distributions(&p, &p).map_err(|e| e.to_string())?;
    let labels: Vec<&str> = (0..200).map(|_| ["a", "b", "c"][rng.random_range(0..3)]).collect();
    let cat_kl = metrics::kl_categorical(&labels, &labels).map_err(|e| e.to_string())?;
    let sample: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    let num_kl = kl_numerical(&sample, &sample).map_err(|e| e.to_string())?;
    ensure(self_kl <= 1e-9 && cat_kl <= 1e-9 && num_kl <= 1e-9, format!("KL(p,p): {self_kl}, {cat_kl}, {num_kl}"))?;

    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let shifted = Normal::new(1.0, 1.0).unwrap();
    let a: Vec<f64> = (0..10_000).map(|_| std_normal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..10_000).map(|_| shifted.sample(&mut rng)).collect();
    let kl = kl_numerical(&a, &b).map_err(|e| e.to_string())?;
    ensure((kl - 0.5).abs() <= 0.1, format!("KL(N(0,1) || N(1,1)) estimate {kl:.4}"))?;

    let rho = metrics::spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).map_err(|e| e.to_string())?.ok_or("spearman undefined")?;
    let exact = 4.5 / 22.5f64.sqrt();
    ensure((rho - exact).abs() <= 1e-9, format!("spearman {rho}"))?;
    Ok(format!("200 random sets exact; KL(p,p) <= {:.1e}; KDE KL {kl:.3}; spearman {rho:.5}", self_kl.max(cat_kl).max(num_kl)))
}

// 6 ------------------------------------------------------------------------

fn imputer_correctness() -> Check {
    let mut mf_total = 0.0;
    let mut med_total = 0.0;
    let mut max_iters = 0;
    for seed in 0..5u64 {
        let mut rng = seeded(600 + seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let n = 400;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.0 * v + noise.sample(&mut rng)).collect();
        let clean = Dataset::builder()
            .numerical("x", x.iter().map(|&v| Some(v)))
            .numerical("y", y.iter().map(|&v| Some(v)))
            .target("t", ["no", "yes"], x.iter().map(|&v| (v > 2.5) as u8))
            .build()
            .map_err(|e| e.to_string())?;
        let spec = MissingnessSpec::new(vec![InjectionRule::mcar(["y"], 0.3)], 0.3).map_err(|e| e.to_string())?;
        let inj = inject(&clean, &spec, seed).map_err(|e| e.to_string())?;
        let rmse_of = |out: &Dataset| -> f64 {
            let rows: Vec<usize> = (0..n).filter(|&r| inj.injected.get(r, 1)).collect();
            let got: Vec<f64> = rows.iter().map(|&r| if let Cell::Num(v) = out.cell(r, 1) { v } else { f64::NAN }).collect();
            let want: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            metrics::rmse(&want, &got).unwrap()
        };
        let mf = fit_miss_forest(&inj.dataset, seed, 100, 10, 1e-3).map_err(|e| e.to_string())?;
        if let ImputerParams::MissForest(m) = &mf.params {
            max_iters = max_iters.max(m.iterations);
        }
        let mf_rmse = rmse_of(&mf.transform(&inj.dataset).map_err(|e| e.to_string())?.dataset);
        let med = imputers::fit_statistical(&inj.dataset, ImputerKind::MedianMode).map_err(|e| e.to_string())?;
        let med_rmse = rmse_of(&med.transform(&inj.dataset).map_err(|e| e.to_string())?.dataset);
        ensure(mf_rmse < med_rmse, format!("seed {seed}: miss-forest {mf_rmse:.4} >= median {med_rmse:.4}"))?;
        mf_total += mf_rmse;
        med_total += med_rmse;
    }
    ensure(max_iters <= 10, format!("miss-forest ran {max_iters} iterations"))?;

    let mut rng = seeded(66);
    let d = mixed_data(200, &mut rng, 0.2);
    let complete: Vec<usize> = (0..d.n_rows()).filter(|&r| (0..d.n_cols()).all(|j| !d.is_null(r, j))).collect();
    let mean_z = complete.iter().map(|&r| if let Cell::Num(v) = d.cell(r, 1) { v } else { 0.0 }).sum::<f64>() / complete.len() as f64;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &r in &complete {
        *counts.entry(d.cell_text(r, 2).unwrap()).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let modes: Vec<&String> = counts.iter().filter(|(_, &c)| c == top).map(|(k, _)| k).collect();
    let k1 = fit_clustering(&d, Some(1), 4, 20, 2).map_err(|e| e.to_string())?;
    let out = k1.transform(&d).map_err(|e| e.to_string())?.dataset;
    for r in 0..d.n_rows() {
        if d.is_null(r, 1) {
            ensure(out.cell(r, 1) == Cell::Num(mean_z), format!("k=1 numeric fill {:?} != mean {mean_z}", out.cell(r, 1)))?;
        }
        if d.is_null(r, 2) {
            let got = out.cell_text(r, 2).unwrap();
            ensure(modes.len() == 1 && *modes[0] == got, format!("k=1 categorical fill {got} vs modes {modes:?}"))?;
        }
    }
    Ok(format!(
        "mean RMSE miss-forest {:.4} < median {:.4} on every seed; max {max_iters} iterations; k=1 fills exact",
        mf_total / 5.0,
        med_total / 5.0
    ))
}

// 7 ------------------------------------------------------------------------

fn demographics_check() -> Check {
    let cfg = DatasetConfig::from_file(fixtures().join("german.toml")).map_err(|e| e.to_string())?;
    let d = cfg.load().map_err(|e| e.to_string())?;
    let by_sex = cfg.group.attribute(0);
    let dem = demographics(&d, &by_sex).map_err(|e| e.to_string())?;
    let (p, q, base) = (dem.privileged.proportion, dem.disadvantaged.proportion, dem.overall.base_rate.unwrap_or(f64::NAN));
    ensure(
        (p - 0.69).abs() <= 0.005 && (q - 0.31).abs() <= 0.005 && (base - 0.7).abs() <= 0.005,
        format!("german: {p:.3}/{q:.3}, base rate {base:.3}"),
    )?;
    ensure(d.n_rows() == 1000 && d.n_cols() + 1 == 21, format!("german shape {} x {}", d.n_rows(), d.n_cols() + 1))?;
    let mut msg = format!("german {p:.3}/{q:.3}, base rate {base:.3}");
    match std::env::var_os("NULLBENCH_DIABETES_SCHEMA") {
        Some(path) => {
            let cfg = DatasetConfig::from_file(&path).map_err(|e| e.to_string())?;
            let d = cfg.load().map_err(|e| e.to_string())?;
            let spec: GroupSpec = preset("diabetes").map_err(|e| e.to_string())?.group;
            let dem = demographics(&d, &spec).map_err(|e| e.to_string())?;
            let (p, q) = (dem.privileged.proportion, dem.disadvantaged.proportion);
            ensure((p - 0.621).abs() <= 0.005 && (q - 0.379).abs() <= 0.005, format!("diabetes: {p:.3}/{q:.3}"))?;
            msg.push_str(&format!("; diabetes {p:.3}/{q:.3}"));
        }
        None => msg.push_str("; diabetes skipped (NULLBENCH_DIABETES_SCHEMA unset)"),
    }
    Ok(msg)
}

// 8 ------------------------------------------------------------------------

const DESK_RUN: &str = r#"
scenarios = ["S1", "S2", "S3", "S10"]
train_rates = [0.3]
imputers = ["deletion", "median-mode", "median-dummy", "clustering", "miss-forest"]
models = ["lr", "dt", "rf"]
seeds = [101, 102, 103]
bootstrap_members = 20

[[datasets]]
config = "german.toml"
"#;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    controller::quantile(v, 0.5)
}

fn desk_scale() -> Check {
    let start = Instant::now();
    let cfg = RunConfig::from_toml(DESK_RUN, fixtures()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut opts = RunOptions::new(dir.path().join("results.jsonl"));
    opts.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    opts.cache_dir = Some(dir.path().join("cache"));
    let summary = controller::run(&cfg, &opts).map_err(|e| e.to_string())?;
    ensure(summary.failed == 0, format!("{} pipelines failed", summary.failed))?;
    let records = ResultStore::open(&opts.results).map_err(|e| e.to_string())?.records().map_err(|e| e.to_string())?;
    ensure(records.iter().all(|r| r.status == Status::Ok), "failed record in store")?;

    let mut f1: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.spec.scenario.map(|s| s.to_string()).as_deref() == Some("S3")) {
        let kind = r.spec.imputer.as_ref().unwrap().kind().as_str();
        f1.entry(kind).or_default().extend(r.reports.iter().filter_map(|t| t.metrics.f1));
    }
    let medians: BTreeMap<&str, f64> = f1.iter_mut().map(|(k, v)| (*k, median(v))).collect();
    let deletion = medians["deletion"];
    let (best_name, best) = medians
        .iter()
        .filter(|(k, _)| **k != "deletion")
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (*k, *v))
        .unwrap();

    let reports = controller::write_report(&records, &dir.path().join("report")).map_err(|e| e.to_string())?;
    let table = controller::correlate(&records, &["f1", "accuracy", "label_stability", "tprd", "tnrd"]).map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("correlation.csv"), table.to_csv().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 900.0, format!("took {secs:.0}s"))?;
    ensure(
        deletion <= best,
        format!("S3 median F1: deletion {deletion:.4} > best non-deletion {best_name} {best:.4}; all: {medians:?}"),
    )?;
    Ok(format!(
        "{} pipelines in {secs:.0}s; S3 median F1 deletion {deletion:.4} <= {best_name} {best:.4}; {} reports + correlation CSV",
        summary.planned,
        reports.len()
    ))
}

// 9 ------------------------------------------------------------------------

const SHIFT_RUN: &str = r#"
scenarios = ["S1"]
train_rates = [0.3]
test_rates = [0.1, 0.2, 0.3, 0.4, 0.5]
imputers = ["median-mode", "miss-forest"]
models = ["dt"]
seeds = [7]
bootstrap_members = 10
baselines = false

[imputer_options]
forest_trees = 20

[[datasets]]
config = "german.toml"
"#;

fn shift_harness() -> Check {
    let cfg = RunConfig::from_toml(SHIFT_RUN, fixtures()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = RunOptions::new(dir.path().join("results.jsonl"));
    let summary = controller::run(&cfg, &opts).map_err(|e| e.to_string())?;
    let records = ResultStore::open(&opts.results).map_err(|e| e.to_string())?.records().map_err(|e| e.to_string())?;
    ensure(summary.failed == 0 && records.len() == 2, format!("{} records, {} failed", records.len(), summary.failed))?;
    for r in &records {
        ensure(r.reports.len() == 5, format!("{} reports", r.reports.len()))?;
        let stages: std::collections::BTreeSet<&str> = r.reports.iter().map(|t| t.model_stage.as_str()).collect();
        ensure(stages.len() == 1 && stages.contains(r.stages.training.as_str()), "reports come from more than one model")?;
        let rates: Vec<f64> = r.reports.iter().map(|t| t.test_rate).collect();
        ensure(rates == [0.1, 0.2, 0.3, 0.4, 0.5], format!("test rates {rates:?}"))?;
        let cells: Vec<usize> = r.reports.iter().map(|t| t.injected_cells).collect();
        ensure(cells.windows(2).all(|w| w[0] < w[1]), format!("injected cells not increasing: {cells:?}"))?;
    }
    Ok("2 pipelines x 5 test rates, one training stage GUID each".into())
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("NULLBENCH_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Check); 9] = [
        (1, "injection-rate fidelity", injection_rates),
        (2, "mechanism semantics", mechanism_semantics),
        (3, "leakage guard", leakage_guard),
        (4, "determinism and cache soundness", determinism),
        (5, "metric oracles", metric_oracles),
        (6, "imputer correctness", imputer_correctness),
        (7, "demographics reproduction", demographics_check),
        (8, "desk-scale end-to-end", desk_scale),
        (9, "missingness-shift harness", shift_harness),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} FAIL {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
