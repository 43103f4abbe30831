use serde::{Deserialize, Serialize};

use super::{Cell, Dataset};
use crate::error::{Error, Result};

/// A value predicate: category-set membership or a numeric threshold.
///
/// Set predicates compare category labels; on numerical cells the listed
/// labels are parsed as numbers. Threshold predicates on categorical cells
/// parse the category label as a number (ordinal codes such as `SCHL`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    In(Vec<String>),
    NotIn(Vec<String>),
    Lt(f64),
    Le(f64),
    Gt(f64),
    Ge(f64),
    Any(Vec<Predicate>),
}

impl Predicate {
    pub fn one_of<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Predicate::In(labels.into_iter().map(Into::into).collect())
    }

    pub fn none_of<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Predicate::NotIn(labels.into_iter().map(Into::into).collect())
    }

    pub fn matches_number(&self, x: f64) -> Result<bool> {
        let in_set = |set: &[String]| -> Result<bool> {
            for s in set {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| Error::Evaluation(format!("predicate label {s:?} is not numeric")))?;
                if v == x {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        Ok(match self {
            Predicate::In(set) => in_set(set)?,
            Predicate::NotIn(set) => !in_set(set)?,
            Predicate::Lt(t) => x < *t,
            Predicate::Le(t) => x <= *t,
            Predicate::Gt(t) => x > *t,
            Predicate::Ge(t) => x >= *t,
            Predicate::Any(ps) => {
                for p in ps {
                    if p.matches_number(x)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    pub fn matches_label(&self, label: &str) -> Result<bool> {
        Ok(match self {
            Predicate::In(set) => set.iter().any(|s| s == label),
            Predicate::NotIn(set) => !set.iter().any(|s| s == label),
            Predicate::Any(ps) => {
                for p in ps {
                    if p.matches_label(label)? {
                        return Ok(true);
                    }
                }
                false
            }
            _ => {
                let x: f64 = label
                    .trim()
                    .parse()
                    .map_err(|_| Error::Evaluation(format!("threshold predicate on non-numeric label {label:?}")))?;
                self.matches_number(x)?
            }
        })
    }

    /// Evaluates the predicate on a dataset cell; `Ok(None)` for null cells.
    pub fn matches_cell(&self, d: &Dataset, row: usize, col: usize) -> Result<Option<bool>> {
        match d.cell(row, col) {
            Cell::Null => Ok(None),
            Cell::Num(x) => self.matches_number(x).map(Some),
            Cell::Cat(code) => self.matches_label(d.category_label(col, code)).map(Some),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Priv,
    Dis,
}

impl Group {
    pub fn swapped(self) -> Group {
        match self {
            Group::Priv => Group::Dis,
            Group::Dis => Group::Priv,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAttribute {
    pub column: String,
    pub dis: Predicate,
}

/// Binary privileged/disadvantaged partition over one or two sensitive
/// attributes. With two attributes a row is `dis` only when both attributes
/// take disadvantaged values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub attributes: Vec<GroupAttribute>,
}

impl GroupSpec {
    pub fn single(column: impl Into<String>, dis: Predicate) -> Self {
        GroupSpec {
            attributes: vec![GroupAttribute {
                column: column.into(),
                dis,
            }],
        }
    }

    pub fn intersectional(a: (impl Into<String>, Predicate), b: (impl Into<String>, Predicate)) -> Self {
        GroupSpec {
            attributes: vec![
                GroupAttribute {
                    column: a.0.into(),
                    dis: a.1,
                },
                GroupAttribute {
                    column: b.0.into(),
                    dis: b.1,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.attributes.len() {
            1 | 2 => Ok(()),
            n => Err(Error::Config(format!("group spec needs 1 or 2 attributes, found {n}"))),
        }
    }

    /// Restricts the spec to one of its attributes (for per-attribute
    /// demographic breakdowns).
    pub fn attribute(&self, i: usize) -> GroupSpec {
        GroupSpec {
            attributes: vec![self.attributes[i].clone()],
        }
    }
}

/// Resolves every row to `priv` or `dis`.
pub fn group_membership(d: &Dataset, g: &GroupSpec) -> Result<Vec<Group>> {
    g.validate()?;
    let cols = g
        .attributes
        .iter()
        .map(|a| d.column_index(&a.column))
        .collect::<Result<Vec<_>>>()?;
    (0..d.n_rows())
        .map(|r| {
            let mut all_dis = true;
            for (a, &c) in g.attributes.iter().zip(&cols) {
                let m = a.dis.matches_cell(d, r, c)?.ok_or_else(|| {
                    Error::Evaluation(format!("row {r}: sensitive attribute `{}` is null", a.column))
                })?;
                all_dis &= m;
            }
            Ok(if all_dis { Group::Dis } else { Group::Priv })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub count: usize,
    pub proportion: f64,
    /// Positive-label fraction; `None` for an empty group.
    pub base_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub overall: GroupStats,
    pub privileged: GroupStats,
    pub disadvantaged: GroupStats,
}

pub fn demographics(d: &Dataset, g: &GroupSpec) -> Result<Demographics> {
    let groups = group_membership(d, g)?;
    let n = d.n_rows();
    let stats = |filter: &dyn Fn(Group) -> bool| {
        let (count, pos) = groups
            .iter()
            .zip(d.labels())
            .filter(|(g, _)| filter(**g))
            .fold((0usize, 0usize), |(c, p), (_, &l)| (c + 1, p + l as usize));
        GroupStats {
            count,
            proportion: if n == 0 { 0.0 } else { count as f64 / n as f64 },
            base_rate: (count > 0).then(|| pos as f64 / count as f64),
        }
    };
    Ok(Demographics {
        overall: stats(&|_| true),
        privileged: stats(&|g| g == Group::Priv),
        disadvantaged: stats(&|g| g == Group::Dis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn people() -> Dataset {
        Dataset::builder()
            .sensitive_categorical(
                "sex",
                ["male", "female"],
                [Some("female"), Some("female"), Some("male"), Some("male")],
            )
            .sensitive_categorical(
                "race",
                ["White", "non-White"],
                [Some("non-White"), Some("White"), Some("non-White"), Some("White")],
            )
            .numerical("income", [Some(1.0), Some(2.0), Some(3.0), Some(4.0)])
            .target("y", ["0", "1"], [1, 0, 1, 1])
            .build()
            .unwrap()
    }

    fn intersectional() -> GroupSpec {
        GroupSpec::intersectional(
            ("sex", Predicate::one_of(["female"])),
            ("race", Predicate::one_of(["non-White"])),
        )
    }

    #[test]
    fn doubly_disadvantaged_rule() {
        let g = group_membership(&people(), &intersectional()).unwrap();
        // non-White woman, White woman, non-White man, White man
        assert_eq!(g, vec![Group::Dis, Group::Priv, Group::Priv, Group::Priv]);
    }

    #[test]
    fn single_attribute_complement() {
        let spec = GroupSpec::single("sex", Predicate::one_of(["female"]));
        let g = group_membership(&people(), &spec).unwrap();
        assert_eq!(g[2], Group::Priv);
        assert_eq!(g[0], Group::Dis);
    }

    #[test]
    fn null_sensitive_cell_names_row() {
        let d = Dataset::builder()
            .sensitive_categorical("sex", ["male", "female"], [Some("male"), None::<&str>])
            .target("y", ["0", "1"], [0, 1])
            .build()
            .unwrap();
        let err = group_membership(&d, &GroupSpec::single("sex", Predicate::one_of(["female"]))).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn numeric_threshold_groups() {
        let d = Dataset::builder()
            .sensitive_numerical("age", [Some(22.0), Some(25.0), Some(40.0)])
            .target("y", ["0", "1"], [0, 1, 1])
            .build()
            .unwrap();
        let g = group_membership(&d, &GroupSpec::single("age", Predicate::Le(25.0))).unwrap();
        assert_eq!(g, vec![Group::Dis, Group::Dis, Group::Priv]);
        let any = Predicate::Any(vec![Predicate::Lt(25.0), Predicate::Gt(30.0)]);
        let g = group_membership(&d, &GroupSpec::single("age", any)).unwrap();
        assert_eq!(g, vec![Group::Dis, Group::Priv, Group::Dis]);
    }

    #[test]
    fn demographics_hand_count() {
        // 2 dis rows labelled (1, 0), 2 priv rows labelled (1, 1).
        let d = Dataset::builder()
            .sensitive_categorical("sex", ["m", "f"], [Some("f"), Some("f"), Some("m"), Some("m")])
            .target("y", ["0", "1"], [1, 0, 1, 1])
            .build()
            .unwrap();
        let demo = demographics(&d, &GroupSpec::single("sex", Predicate::one_of(["f"]))).unwrap();
        assert_eq!(demo.disadvantaged.base_rate, Some(0.5));
        assert_eq!(demo.privileged.base_rate, Some(1.0));
        assert_eq!(demo.overall.base_rate, Some(0.75));
        assert!((demo.privileged.proportion + demo.disadvantaged.proportion - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_group_base_rate_is_undefined() {
        let d = Dataset::builder()
            .sensitive_categorical("sex", ["m", "f"], [Some("m"), Some("m")])
            .target("y", ["0", "1"], [1, 0])
            .build()
            .unwrap();
        let demo = demographics(&d, &GroupSpec::single("sex", Predicate::one_of(["f"]))).unwrap();
        assert_eq!(demo.privileged.proportion, 1.0);
        assert_eq!(demo.disadvantaged.proportion, 0.0);
        assert_eq!(demo.disadvantaged.base_rate, None);
    }

    #[test]
    fn membership_ignores_row_order_and_other_features() {
        let d = people();
        let spec = intersectional();
        let base = group_membership(&d, &spec).unwrap();
        let order = [3, 1, 0, 2];
        let shuffled = group_membership(&d.select_rows(&order), &spec).unwrap();
        for (i, &r) in order.iter().enumerate() {
            assert_eq!(shuffled[i], base[r]);
        }
        let mut changed = d.clone();
        changed.set_cell(0, 2, Cell::Num(99.0)).unwrap();
        assert_eq!(group_membership(&changed, &spec).unwrap(), base);
    }

    #[test]
    fn predicate_serde_shape() {
        let p: Predicate = toml::from_str::<std::collections::BTreeMap<String, Predicate>>("p = { le = 25.0 }").unwrap()["p"].clone();
        assert_eq!(p, Predicate::Le(25.0));
        let p: Predicate = serde_json::from_str(r#"{"not_in":["no account"]}"#).unwrap();
        assert_eq!(p, Predicate::none_of(["no account"]));
    }
}
