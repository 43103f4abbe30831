//! Seeded simulation of MCAR, MAR and MNAR missingness from declarative rule
//! tables, plus the train/test evaluation scenarios.

mod presets;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{group_membership, Dataset, Group, GroupSpec, NullMask, Predicate};
use crate::error::{Error, Result};
use crate::rng;

pub use presets::{preset, preset_names, Preset};
pub use scenario::{build_scenario, scenario_at_rates, Scenario, ScenarioId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "MCAR")]
    Mcar,
    #[serde(rename = "MAR")]
    Mar,
    #[serde(rename = "MNAR")]
    Mnar,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a rule table: mask `missing_columns` with probability `p_dis`
/// on rows whose conditional value satisfies `dis_predicate`, `p_priv`
/// otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionRule {
    pub mechanism: Mechanism,
    pub missing_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dis_predicate: Option<Predicate>,
    pub p_dis: f64,
    pub p_priv: f64,
}

impl InjectionRule {
    pub fn mcar<S: Into<String>>(columns: impl IntoIterator<Item = S>, p: f64) -> Self {
        InjectionRule {
            mechanism: Mechanism::Mcar,
            missing_columns: columns.into_iter().map(Into::into).collect(),
            conditional_column: None,
            dis_predicate: None,
            p_dis: p,
            p_priv: p,
        }
    }

    pub fn mar<S: Into<String>>(columns: impl IntoIterator<Item = S>, conditional: &str, dis: Predicate, p_dis: f64, p_priv: f64) -> Self {
        InjectionRule {
            mechanism: Mechanism::Mar,
            missing_columns: columns.into_iter().map(Into::into).collect(),
            conditional_column: Some(conditional.to_owned()),
            dis_predicate: Some(dis),
            p_dis,
            p_priv,
        }
    }

    pub fn mnar(column: &str, dis: Predicate, p_dis: f64, p_priv: f64) -> Self {
        InjectionRule {
            mechanism: Mechanism::Mnar,
            missing_columns: vec![column.to_owned()],
            conditional_column: Some(column.to_owned()),
            dis_predicate: Some(dis),
            p_dis,
            p_priv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for p in [self.p_dis, self.p_priv] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("probability {p} outside [0, 1]"));
            }
        }
        if self.missing_columns.is_empty() {
            return bad("rule has no missing columns".into());
        }
        match self.mechanism {
            Mechanism::Mcar => {
                if self.conditional_column.is_some() || self.dis_predicate.is_some() {
                    return bad("MCAR rules take no condition".into());
                }
                if self.p_dis != self.p_priv {
                    return bad("MCAR rules need p_dis = p_priv".into());
                }
            }
            Mechanism::Mar | Mechanism::Mnar => {
                let Some(cond) = &self.conditional_column else {
                    return bad(format!("{} rule needs a conditional column", self.mechanism));
                };
                if self.dis_predicate.is_none() {
                    return bad(format!("{} rule needs a dis predicate", self.mechanism));
                }
                let inside = self.missing_columns.contains(cond);
                if self.mechanism == Mechanism::Mar && inside {
                    return bad(format!("MAR conditional column `{cond}` is also a missing column"));
                }
                if self.mechanism == Mechanism::Mnar && (!inside || self.missing_columns.len() != 1) {
                    return bad(format!("MNAR rule must target exactly its conditional column `{cond}`"));
                }
            }
        }
        Ok(())
    }
}

/// A rule table authored for `base_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub rules: Vec<InjectionRule>,
    pub base_rate: f64,
}

impl MissingnessSpec {
    pub fn new(rules: Vec<InjectionRule>, base_rate: f64) -> Result<Self> {
        let spec = MissingnessSpec { rules, base_rate };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_rate > 0.0 && self.base_rate <= 1.0) {
            return Err(Error::Config(format!("base rate {} outside (0, 1]", self.base_rate)));
        }
        let mut seen: BTreeMap<(Mechanism, &str), usize> = BTreeMap::new();
        for (i, r) in self.rules.iter().enumerate() {
            r.validate()?;
            for c in &r.missing_columns {
                if let Some(j) = seen.insert((r.mechanism, c.as_str()), i) {
                    return Err(Error::Config(format!(
                        "{} rules {j} and {i} both target column `{c}`",
                        r.mechanism
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mechanisms(&self) -> Vec<Mechanism> {
        let mut m: Vec<Mechanism> = self.rules.iter().map(|r| r.mechanism).collect();
        m.sort();
        m.dedup();
        m
    }

    /// Rules of one mechanism as a spec of their own.
    pub fn only(&self, mechanism: Mechanism) -> MissingnessSpec {
        MissingnessSpec {
            rules: self.rules.iter().filter(|r| r.mechanism == mechanism).cloned().collect(),
            base_rate: self.base_rate,
        }
    }

    /// Splits a mixed table into one spec per mechanism present.
    pub fn per_mechanism(&self) -> BTreeMap<Mechanism, MissingnessSpec> {
        self.mechanisms().into_iter().map(|m| (m, self.only(m))).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: MissingnessSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("rule tables always serialize")
    }
}

/// Rescales every probability by `target_rate / base_rate`, clamped to
/// `[0, 1]`.
pub fn scale_rates(spec: &MissingnessSpec, target_rate: f64) -> Result<MissingnessSpec> {
    if !(target_rate > 0.0 && target_rate <= 1.0) {
        return Err(Error::Config(format!("target rate {target_rate} outside (0, 1]")));
    }
    if target_rate == spec.base_rate {
        return Ok(spec.clone());
    }
    let factor = target_rate / spec.base_rate;
    let rules = spec
        .rules
        .iter()
        .map(|r| InjectionRule {
            p_dis: (r.p_dis * factor).clamp(0.0, 1.0),
            p_priv: (r.p_priv * factor).clamp(0.0, 1.0),
            ..r.clone()
        })
        .collect();
    Ok(MissingnessSpec {
        rules,
        base_rate: target_rate,
    })
}

/// Injection output: the dataset with the new nulls applied and the exact
/// set of cells this call nulled.
#[derive(Clone, Debug)]
pub struct Injection {
    pub dataset: Dataset,
    pub injected: NullMask,
}

/// Applies a single rule table.
pub fn inject(d: &Dataset, spec: &MissingnessSpec, seed: u64) -> Result<Injection> {
    inject_all(d, std::slice::from_ref(spec), seed)
}

/// Applies several rule tables at once (mixed missingness). Every predicate
/// is evaluated on the values of `d`, before any masking, and the masks are
/// unioned. Spec `i` draws from the stream derived from `(seed, i)`.
pub fn inject_all(d: &Dataset, specs: &[MissingnessSpec], seed: u64) -> Result<Injection> {
    let mut injected = NullMask::new(d.n_rows(), d.n_cols());
    for (i, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let spec_seed = rng::derive(seed, &[i as u64]);
        draw_mask(d, spec, spec_seed, &mut injected)?;
    }
    let mut out = d.clone();
    for r in 0..d.n_rows() {
        for c in 0..d.n_cols() {
            if injected.get(r, c) {
                out.set_null(r, c);
            }
        }
    }
    Ok(Injection { dataset: out, injected })
}

fn draw_mask(d: &Dataset, spec: &MissingnessSpec, seed: u64, out: &mut NullMask) -> Result<()> {
    for (k, rule) in spec.rules.iter().enumerate() {
        let cols = rule
            .missing_columns
            .iter()
            .map(|c| d.column_index(c))
            .collect::<Result<Vec<_>>>()?;
        let cond = rule.conditional_column.as_deref().map(|c| d.column_index(c)).transpose()?;
        for r in 0..d.n_rows() {
            if cols.iter().all(|&c| d.is_null(r, c)) {
                continue;
            }
            let p = match (cond, &rule.dis_predicate) {
                (Some(ci), Some(pred)) => {
                    let dis = pred.matches_cell(d, r, ci)?.ok_or_else(|| {
                        Error::Injection(format!(
                            "row {r}: conditional column `{}` is null",
                            d.column_schema(ci).name
                        ))
                    })?;
                    if dis {
                        rule.p_dis
                    } else {
                        rule.p_priv
                    }
                }
                _ => rule.p_dis,
            };
            if p <= 0.0 {
                continue;
            }
            for &c in &cols {
                if d.is_null(r, c) {
                    continue;
                }
                if rng::cell_uniform(seed, k as u64, r as u64, c as u64) < p {
                    out.set(r, c, true);
                }
            }
        }
    }
    Ok(())
}

/// Null fractions of one column, overall and per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnRates {
    pub column: String,
    pub overall: f64,
    pub privileged: Option<f64>,
    pub disadvantaged: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedRates {
    pub columns: Vec<ColumnRates>,
    /// Fraction of rows with at least one masked cell.
    pub rows_with_any: f64,
}

impl ObservedRates {
    pub fn column(&self, name: &str) -> Option<&ColumnRates> {
        self.columns.iter().find(|c| c.column == name)
    }
}

/// Exact per-column, per-group fractions of masked cells.
pub fn observed_rates(mask: &NullMask, d: &Dataset, g: &GroupSpec) -> Result<ObservedRates> {
    if mask.shape() != (d.n_rows(), d.n_cols()) {
        return Err(Error::Contract(format!(
            "mask shape {:?} does not match dataset {:?}",
            mask.shape(),
            (d.n_rows(), d.n_cols())
        )));
    }
    let groups = group_membership(d, g)?;
    let n = d.n_rows();
    let n_dis = groups.iter().filter(|&&g| g == Group::Dis).count();
    let n_priv = n - n_dis;
    let frac = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let columns = (0..d.n_cols())
        .map(|c| {
            let (mut all, mut dis) = (0usize, 0usize);
            for (r, g) in groups.iter().enumerate() {
                if mask.get(r, c) {
                    all += 1;
                    dis += usize::from(*g == Group::Dis);
                }
            }
            ColumnRates {
                column: d.column_schema(c).name.clone(),
                overall: frac(all, n).unwrap_or(0.0),
                privileged: frac(all - dis, n_priv),
                disadvantaged: frac(dis, n_dis),
            }
        })
        .collect();
    let rows = (0..n).filter(|&r| mask.row_has_any(r)).count();
    Ok(ObservedRates {
        columns,
        rows_with_any: frac(rows, n).unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Cell;
    use proptest::prelude::*;

    fn synthetic(n: usize) -> Dataset {
        Dataset::builder()
            .numerical("a", (0..n).map(|i| Some((i % 97) as f64)))
            .numerical("b", (0..n).map(|i| Some((i % 13) as f64)))
            .sensitive_categorical("sex", ["male", "female"], (0..n).map(|i| Some(if i % 2 == 0 { "female" } else { "male" })))
            .target("y", ["0", "1"], (0..n).map(|i| (i % 3 == 0) as u8))
            .build()
            .unwrap()
    }

    #[test]
    fn certainty_clamp_masks_everything() {
        let d = synthetic(50);
        let spec = MissingnessSpec::new(vec![InjectionRule::mcar(["a", "b"], 1.0)], 0.3).unwrap();
        let inj = inject(&d, &spec, 3).unwrap();
        assert_eq!(inj.injected.column_count(0), 50);
        assert_eq!(inj.injected.column_count(1), 50);
        assert_eq!(inj.injected.column_count(2), 0);
        assert_eq!(inj.dataset.cell(4, 0), Cell::Null);
    }

    #[test]
    fn already_null_cells_are_not_reinjected() {
        let d = Dataset::builder()
            .numerical("a", [None, Some(1.0)])
            .target("y", ["0", "1"], [0, 1])
            .build()
            .unwrap();
        let spec = MissingnessSpec::new(vec![InjectionRule::mcar(["a"], 1.0)], 0.3).unwrap();
        let inj = inject(&d, &spec, 0).unwrap();
        assert!(!inj.injected.get(0, 0));
        assert!(inj.injected.get(1, 0));
        assert!(inj.dataset.mask().contains(d.mask()));
    }

    #[test]
    fn null_conditional_is_an_error() {
        let d = Dataset::builder()
            .numerical("a", [Some(1.0), Some(2.0)])
            .categorical("sex", ["m", "f"], [Some("m"), None])
            .target("y", ["0", "1"], [0, 1])
            .build()
            .unwrap();
        let spec = MissingnessSpec::new(vec![InjectionRule::mar(["a"], "sex", Predicate::one_of(["f"]), 0.2, 0.1)], 0.3).unwrap();
        assert!(matches!(inject(&d, &spec, 0), Err(Error::Injection(_))));
    }

    #[test]
    fn rule_invariants() {
        assert!(InjectionRule::mar(["a"], "a", Predicate::Lt(1.0), 0.2, 0.1).validate().is_err());
        assert!(InjectionRule::mnar("a", Predicate::Lt(1.0), 0.2, 0.1).validate().is_ok());
        let mut two = InjectionRule::mnar("a", Predicate::Lt(1.0), 0.2, 0.1);
        two.missing_columns.push("b".into());
        assert!(two.validate().is_err());
        let mut mcar = InjectionRule::mcar(["a"], 0.3);
        mcar.p_priv = 0.2;
        assert!(mcar.validate().is_err());
        assert!(InjectionRule::mcar(["a"], 1.3).validate().is_err());
        let overlap = MissingnessSpec::new(
            vec![
                InjectionRule::mar(["a"], "s", Predicate::Lt(1.0), 0.2, 0.1),
                InjectionRule::mar(["a"], "t", Predicate::Lt(1.0), 0.2, 0.1),
            ],
            0.3,
        );
        assert!(overlap.is_err());
    }

    #[test]
    fn scale_identity_and_arithmetic() {
        let spec = MissingnessSpec::new(
            vec![
                InjectionRule::mcar(["a"], 0.3),
                InjectionRule::mar(["b"], "sex", Predicate::one_of(["female"]), 0.8, 0.1),
            ],
            0.3,
        )
        .unwrap();
        assert_eq!(scale_rates(&spec, 0.3).unwrap(), spec);
        let low = scale_rates(&spec, 0.1).unwrap();
        assert!((low.rules[0].p_dis - 0.1).abs() < 1e-12);
        assert_eq!(low.base_rate, 0.1);
        let high = scale_rates(&spec, 0.5).unwrap();
        assert_eq!(high.rules[1].p_dis, 1.0);
        assert!((high.rules[1].p_priv - 0.1 * 5.0 / 3.0).abs() < 1e-12);
        assert!(scale_rates(&spec, 0.0).is_err());
        assert!(scale_rates(&spec, -0.2).is_err());
    }

    #[test]
    fn observed_rates_counting() {
        let d = synthetic(4);
        let mut mask = NullMask::new(4, 3);
        let g = GroupSpec::single("sex", Predicate::one_of(["female"]));
        let empty = observed_rates(&mask, &d, &g).unwrap();
        assert!(empty.columns.iter().all(|c| c.overall == 0.0));
        mask.set(0, 1, true);
        mask.set(1, 1, true);
        let rates = observed_rates(&mask, &d, &g).unwrap();
        let b = rates.column("b").unwrap();
        assert_eq!(b.overall, 0.5);
        assert_eq!(b.disadvantaged, Some(0.5));
        assert_eq!(b.privileged, Some(0.5));
        assert_eq!(rates.rows_with_any, 0.5);
    }

    #[test]
    fn mixed_injection_evaluates_predicates_on_true_values() {
        let d = synthetic(200);
        let mcar = MissingnessSpec::new(vec![InjectionRule::mcar(["a"], 1.0)], 0.3).unwrap();
        let mnar = MissingnessSpec::new(vec![InjectionRule::mnar("a", Predicate::Lt(1000.0), 1.0, 1.0)], 0.3).unwrap();
        // The MNAR predicate must not see the MCAR nulls.
        let inj = inject_all(&d, &[mcar, mnar], 1).unwrap();
        assert_eq!(inj.injected.column_count(0), 200);
    }

    #[test]
    fn rule_table_toml_round_trip() {
        let spec = preset("german").unwrap().rules;
        let text = spec.to_toml();
        assert_eq!(MissingnessSpec::from_toml(&text).unwrap(), spec);
    }

    proptest! {
        #[test]
        fn injection_is_monotone_and_deterministic(seed in any::<u64>(), p in 0.0f64..1.0) {
            let d = synthetic(64);
            let spec = MissingnessSpec::new(vec![
                InjectionRule::mar(["a"], "sex", Predicate::one_of(["female"]), p, p / 2.0),
                InjectionRule::mnar("b", Predicate::Lt(6.0), p, 0.0),
            ], 0.3).unwrap();
            let first = inject(&d, &spec, seed).unwrap();
            let second = inject(&first.dataset, &spec, seed).unwrap();
            prop_assert!(second.dataset.mask().contains(first.dataset.mask()));
            prop_assert!(first.dataset.mask().contains(d.mask()));
            let again = inject(&d, &spec, seed).unwrap();
            prop_assert_eq!(again.injected, first.injected);
        }

        #[test]
        fn scaling_composes(a in 0.05f64..1.0, b in 0.05f64..1.0, p in 0.0f64..1.0) {
            let spec = MissingnessSpec::new(vec![InjectionRule::mcar(["a"], p)], 0.3).unwrap();
            let twice = scale_rates(&scale_rates(&spec, a).unwrap(), b).unwrap();
            let once = scale_rates(&spec, b).unwrap();
            let expect = (p * a / 0.3).min(1.0) * b / a;
            prop_assert!((twice.rules[0].p_dis - expect.min(1.0)).abs() < 1e-9);
            if p * a / 0.3 <= 1.0 {
                prop_assert!((twice.rules[0].p_dis - once.rules[0].p_dis).abs() < 1e-9);
            }
        }
    }
}
