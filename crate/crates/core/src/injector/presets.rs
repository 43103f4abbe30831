//! Built-in rule tables for the seven benchmark datasets, authored for a 30%
//! error rate. Column names and category labels follow the published
//! tables; folktables and heart use their raw integer codes (`SEX` 2 =
//! female, `RAC1P` 1 = White, `MAR` 1 = married, `DIS` 1 = with a
//! disability, `MIL` 2/3 = past duty/training, heart `gender` 1 = female,
//! `cholesterol`/`gluc` 1 = normal).

use super::{InjectionRule as Rule, MissingnessSpec};
use crate::dataset::{GroupSpec, Predicate as P};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub rules: MissingnessSpec,
    pub group: GroupSpec,
}

const NAMES: [&str; 7] = ["diabetes", "german", "folk-income", "law-school", "bank", "heart", "folk-employment"];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

pub fn preset(name: &str) -> Result<Preset> {
    let (name, rules, group) = match name {
        "diabetes" => ("diabetes", diabetes(), GroupSpec::single("Sex", P::one_of(["female"]))),
        "german" => (
            "german",
            german(),
            GroupSpec::intersectional(("sex", P::one_of(["female"])), ("age", P::Le(25.0))),
        ),
        "folk-income" => ("folk-income", folk_income(), folk_group()),
        "law-school" => (
            "law-school",
            law_school(),
            GroupSpec::intersectional(("male", P::one_of(["0"])), ("race", P::none_of(["White"]))),
        ),
        "bank" => ("bank", bank(), GroupSpec::single("age", P::Any(vec![P::Lt(25.0), P::Gt(60.0)]))),
        "heart" => ("heart", heart(), GroupSpec::single("gender", P::one_of(["1"]))),
        "folk-employment" => ("folk-employment", folk_employment(), folk_group()),
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (known: {})",
                NAMES.join(", ")
            )))
        }
    };
    let rules = MissingnessSpec::new(rules, 0.3)?;
    Ok(Preset { name, rules, group })
}

fn folk_group() -> GroupSpec {
    GroupSpec::intersectional(("SEX", P::one_of(["2"])), ("RAC1P", P::none_of(["1"])))
}

fn diabetes() -> Vec<Rule> {
    vec![
        Rule::mcar(["SoundSleep", "Family_Diabetes", "PhysicallyActive", "RegularMedicine"], 0.3),
        Rule::mar(["Family_Diabetes", "RegularMedicine"], "Sex", P::one_of(["female"]), 0.2, 0.1),
        Rule::mar(["PhysicallyActive", "SoundSleep"], "Age", P::Ge(40.0), 0.2, 0.1),
        Rule::mnar("Family_Diabetes", P::one_of(["yes"]), 0.25, 0.05),
        Rule::mnar("RegularMedicine", P::one_of(["yes"]), 0.2, 0.1),
        Rule::mnar("PhysicallyActive", P::one_of(["none", "less than half an hr"]), 0.25, 0.05),
        Rule::mnar("SoundSleep", P::Lt(5.0), 0.2, 0.1),
    ]
}

fn german() -> Vec<Rule> {
    vec![
        Rule::mcar(
            ["duration", "credit-amount", "checking-account", "savings-account", "employment-since"],
            0.3,
        ),
        Rule::mar(["savings-account", "checking-account", "credit-amount"], "age", P::Le(25.0), 0.18, 0.12),
        Rule::mar(["employment-since", "duration"], "sex", P::one_of(["female"]), 0.2, 0.1),
        Rule::mnar("checking-account", P::one_of(["no account"]), 0.25, 0.05),
        Rule::mnar("duration", P::Le(20.0), 0.25, 0.05),
        Rule::mnar("savings-account", P::none_of(["no savings account"]), 0.2, 0.1),
        Rule::mnar("employment-since", P::one_of(["<1 year", "unemployed"]), 0.2, 0.1),
        Rule::mnar("credit-amount", P::Gt(5000.0), 0.25, 0.05),
    ]
}

fn folk_income() -> Vec<Rule> {
    vec![
        Rule::mcar(["WKHP", "AGEP", "SCHL", "MAR"], 0.3),
        Rule::mar(["WKHP", "SCHL"], "SEX", P::one_of(["2"]), 0.2, 0.1),
        Rule::mar(["MAR", "AGEP"], "RAC1P", P::none_of(["1"]), 0.2, 0.1),
        Rule::mnar("MAR", P::none_of(["1"]), 0.25, 0.05),
        Rule::mnar("WKHP", P::Lt(40.0), 0.25, 0.05),
        Rule::mnar("AGEP", P::Gt(50.0), 0.25, 0.05),
        Rule::mnar("SCHL", P::Lt(21.0), 0.25, 0.05),
    ]
}

fn folk_employment() -> Vec<Rule> {
    vec![
        Rule::mcar(["DIS", "MIL", "AGEP", "SCHL"], 0.3),
        Rule::mar(["MIL", "AGEP"], "SEX", P::one_of(["2"]), 0.2, 0.1),
        Rule::mar(["DIS", "SCHL"], "RAC1P", P::none_of(["1"]), 0.2, 0.1),
        Rule::mnar("DIS", P::one_of(["1"]), 0.25, 0.05),
        // Printed with the lower rate on the dis condition.
        Rule::mnar("MIL", P::one_of(["2", "3"]), 0.05, 0.25),
        Rule::mnar("AGEP", P::Gt(50.0), 0.25, 0.05),
        Rule::mnar("SCHL", P::Lt(21.0), 0.25, 0.05),
    ]
}

fn law_school() -> Vec<Rule> {
    vec![
        Rule::mcar(["zfygpa", "ugpa", "fam_inc", "tier"], 0.3),
        Rule::mar(["ugpa", "zfygpa"], "male", P::one_of(["0"]), 0.2, 0.1),
        Rule::mar(["fam_inc", "tier"], "race", P::none_of(["White"]), 0.15, 0.15),
        Rule::mnar("ugpa", P::Lt(3.0), 0.2, 0.1),
        Rule::mnar("zfygpa", P::Le(0.0), 0.2, 0.1),
        Rule::mnar("fam_inc", P::Lt(4.0), 0.2, 0.1),
        Rule::mnar("tier", P::Lt(4.0), 0.2, 0.1),
    ]
}

fn bank() -> Vec<Rule> {
    vec![
        Rule::mcar(["balance", "campaign", "education", "job"], 0.3),
        Rule::mar(["education", "job"], "age", P::Ge(30.0), 0.18, 0.12),
        Rule::mar(["balance", "campaign"], "marital", P::one_of(["single"]), 0.2, 0.1),
        Rule::mnar("education", P::one_of(["tertiary"]), 0.2, 0.1),
        Rule::mnar("job", P::none_of(["management", "blue-collar"]), 0.2, 0.1),
        Rule::mnar("balance", P::Le(1000.0), 0.2, 0.1),
        Rule::mnar("campaign", P::Le(1.0), 0.2, 0.1),
    ]
}

fn heart() -> Vec<Rule> {
    vec![
        Rule::mcar(["weight", "height", "cholesterol", "gluc"], 0.3),
        Rule::mar(["weight", "height"], "gender", P::one_of(["1"]), 0.2, 0.1),
        Rule::mar(["cholesterol", "gluc"], "age", P::Ge(50.0), 0.2, 0.1),
        Rule::mnar("weight", P::Ge(75.0), 0.25, 0.05),
        Rule::mnar("height", P::Lt(160.0), 0.2, 0.1),
        Rule::mnar("cholesterol", P::none_of(["1"]), 0.16, 0.14),
        Rule::mnar("gluc", P::none_of(["1"]), 0.12, 0.18),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::injector::Mechanism;

    #[test]
    fn every_preset_is_valid() {
        for name in preset_names() {
            let p = preset(name).unwrap();
            assert_eq!(p.rules.base_rate, 0.3);
            let per = p.rules.per_mechanism();
            assert_eq!(per.len(), 3, "{name}");
            let mcar = &per[&Mechanism::Mcar].rules;
            assert_eq!(mcar.len(), 1);
            assert_eq!(mcar[0].p_dis, 0.3);
            // MAR and MNAR rules cover exactly the MCAR columns.
            let mut cols: Vec<_> = mcar[0].missing_columns.clone();
            cols.sort();
            for m in [Mechanism::Mar, Mechanism::Mnar] {
                let mut c: Vec<_> = per[&m].rules.iter().flat_map(|r| r.missing_columns.clone()).collect();
                c.sort();
                assert_eq!(c, cols, "{name} {m}");
            }
        }
    }

    #[test]
    fn diabetes_mar_sex_rule() {
        let p = preset("diabetes").unwrap();
        let rule = p
            .rules
            .rules
            .iter()
            .find(|r| r.mechanism == Mechanism::Mar && r.conditional_column.as_deref() == Some("Sex"))
            .unwrap();
        assert!(rule.missing_columns.contains(&"Family_Diabetes".to_string()));
        assert_eq!((rule.p_dis, rule.p_priv), (0.2, 0.1));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("titanic"), Err(Error::Config(_))));
    }
}
