use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{scale_rates, Mechanism, MissingnessSpec};
use crate::error::{Error, Result};

/// Evaluation scenarios: S1–S3 same mechanism in train and test, S4–S9
/// mechanism shift, S10 all three mechanisms in both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    S9,
    S10,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 10] = [
        ScenarioId::S1,
        ScenarioId::S2,
        ScenarioId::S3,
        ScenarioId::S4,
        ScenarioId::S5,
        ScenarioId::S6,
        ScenarioId::S7,
        ScenarioId::S8,
        ScenarioId::S9,
        ScenarioId::S10,
    ];

    /// (train, test) mechanisms.
    pub fn mechanisms(self) -> (Vec<Mechanism>, Vec<Mechanism>) {
        use Mechanism::*;
        let pair = |a, b| (vec![a], vec![b]);
        match self {
            ScenarioId::S1 => pair(Mcar, Mcar),
            ScenarioId::S2 => pair(Mar, Mar),
            ScenarioId::S3 => pair(Mnar, Mnar),
            ScenarioId::S4 => pair(Mcar, Mar),
            ScenarioId::S5 => pair(Mcar, Mnar),
            ScenarioId::S6 => pair(Mar, Mcar),
            ScenarioId::S7 => pair(Mar, Mnar),
            ScenarioId::S8 => pair(Mnar, Mcar),
            ScenarioId::S9 => pair(Mnar, Mar),
            ScenarioId::S10 => (Mechanism::ALL.to_vec(), Mechanism::ALL.to_vec()),
        }
    }

    pub fn is_mixed(self) -> bool {
        self == ScenarioId::S10
    }

    /// Short label of the training side, e.g. `MCAR` or `MCAR+MAR+MNAR`.
    pub fn train_label(self) -> String {
        self.mechanisms().0.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
    }

    pub fn test_label(self) -> String {
        self.mechanisms().1.iter().map(|m| m.as_str()).collect::<Vec<_>>().join("+")
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}` (expected S1..S10)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: ScenarioId,
    pub train_specs: Vec<MissingnessSpec>,
    pub test_specs: Vec<MissingnessSpec>,
}

fn required(per_mechanism: &BTreeMap<Mechanism, MissingnessSpec>, m: Mechanism) -> Result<&MissingnessSpec> {
    per_mechanism
        .get(&m)
        .ok_or_else(|| Error::Config(format!("no {m} rule table provided")))
}

/// Places the per-mechanism specs per scenario. S10 rescales every spec to
/// `mixed_component_rate` (0.1 for a 30% total).
pub fn build_scenario(id: ScenarioId, per_mechanism: &BTreeMap<Mechanism, MissingnessSpec>, mixed_component_rate: f64) -> Result<Scenario> {
    let (train, test) = id.mechanisms();
    let place = |ms: &[Mechanism]| -> Result<Vec<MissingnessSpec>> {
        ms.iter()
            .map(|&m| {
                let spec = required(per_mechanism, m)?;
                if id.is_mixed() {
                    scale_rates(spec, mixed_component_rate)
                } else {
                    Ok(spec.clone())
                }
            })
            .collect()
    };
    Ok(Scenario {
        id,
        train_specs: place(&train)?,
        test_specs: place(&test)?,
    })
}

/// Builds a scenario whose train side totals `train_rate` and test side
/// `test_rate`. Mixed scenarios split each total evenly over the three
/// mechanisms.
pub fn scenario_at_rates(
    id: ScenarioId,
    per_mechanism: &BTreeMap<Mechanism, MissingnessSpec>,
    train_rate: f64,
    test_rate: f64,
) -> Result<Scenario> {
    let (train, test) = id.mechanisms();
    let place = |ms: &[Mechanism], rate: f64| -> Result<Vec<MissingnessSpec>> {
        let per = if id.is_mixed() { rate / ms.len() as f64 } else { rate };
        ms.iter().map(|&m| scale_rates(required(per_mechanism, m)?, per)).collect()
    };
    Ok(Scenario {
        id,
        train_specs: place(&train, train_rate)?,
        test_specs: place(&test, test_rate)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::injector::preset;

    fn specs() -> BTreeMap<Mechanism, MissingnessSpec> {
        preset("diabetes").unwrap().rules.per_mechanism()
    }

    #[test]
    fn table_grid() {
        use Mechanism::*;
        let s1 = build_scenario(ScenarioId::S1, &specs(), 0.1).unwrap();
        assert_eq!(s1.train_specs[0].mechanisms(), vec![Mcar]);
        assert_eq!(s1.test_specs[0].mechanisms(), vec![Mcar]);
        let s5 = build_scenario(ScenarioId::S5, &specs(), 0.1).unwrap();
        assert_eq!(s5.train_specs[0].mechanisms(), vec![Mcar]);
        assert_eq!(s5.test_specs[0].mechanisms(), vec![Mnar]);
        for id in &ScenarioId::ALL[..3] {
            let (a, b) = id.mechanisms();
            assert_eq!(a, b);
        }
        for id in &ScenarioId::ALL[3..9] {
            let (a, b) = id.mechanisms();
            assert_ne!(a, b);
        }
    }

    #[test]
    fn s10_components_at_mixed_rate() {
        let s10 = build_scenario(ScenarioId::S10, &specs(), 0.1).unwrap();
        assert_eq!(s10.train_specs.len(), 3);
        assert_eq!(s10.test_specs.len(), 3);
        for s in s10.train_specs.iter().chain(&s10.test_specs) {
            assert_eq!(s.base_rate, 0.1);
        }
        let mcar = &s10.train_specs[0];
        assert!((mcar.rules[0].p_dis - 0.1).abs() < 1e-12);
    }

    #[test]
    fn missing_mechanism_is_config_error() {
        let mut partial = specs();
        partial.remove(&Mechanism::Mnar);
        assert!(matches!(build_scenario(ScenarioId::S5, &partial, 0.1), Err(Error::Config(_))));
        assert!(build_scenario(ScenarioId::S4, &partial, 0.1).is_ok());
    }

    #[test]
    fn rates_per_side() {
        let s = scenario_at_rates(ScenarioId::S1, &specs(), 0.3, 0.5).unwrap();
        assert_eq!(s.train_specs[0].base_rate, 0.3);
        assert!((s.test_specs[0].rules[0].p_dis - 0.5).abs() < 1e-12);
        let mixed = scenario_at_rates(ScenarioId::S10, &specs(), 0.3, 0.3).unwrap();
        assert!((mixed.train_specs[0].base_rate - 0.1).abs() < 1e-12);
    }

    #[test]
    fn parse_ids() {
        assert_eq!("s10".parse::<ScenarioId>().unwrap(), ScenarioId::S10);
        assert!("S11".parse::<ScenarioId>().is_err());
    }
}
